use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use qas_core::experiment::{
    run_baseline, run_training, summarize, verify_report, write_report, Baseline, ExperimentConfig, Overrides, RunReport,
};
use qas_core::QasError;

/// Multi-agent reinforcement-learning search for parameterized quantum circuits.
#[derive(Parser)]
#[command(name = "marlqas", version)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Train the search agents once per seed and write the report.
    Train(RunArgs),
    /// Evaluate a fixed QAOA or HEA circuit.
    Baseline {
        #[command(flatten)]
        run: RunArgs,
        /// QAOA depth (overrides the config baseline).
        #[arg(long, conflicts_with = "hea")]
        qaoa: Option<usize>,
        /// HEA layer count (overrides the config baseline).
        #[arg(long)]
        hea: Option<usize>,
    },
    /// Merge reports into comparison and step-count tables.
    Summarize {
        /// Report files or run directories.
        #[arg(required = true)]
        reports: Vec<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Recompute every reported number from the saved circuits and logs.
    Verify {
        #[arg(required = true)]
        reports: Vec<PathBuf>,
    },
    /// Print the fully expanded configuration.
    PrintConfig {
        #[command(flatten)]
        run: RunArgs,
        /// Problem used when no config file is given.
        #[arg(long, value_parser = ["maxcut_cubic", "schwinger"])]
        problem: Option<String>,
        /// Qubit count used when no config file is given.
        #[arg(short, long)]
        n: Option<usize>,
    },
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    /// Run this single seed instead of the configured list.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    agents: Option<usize>,
    /// Single worker and no wall-clock column, for byte-identical logs.
    #[arg(long)]
    deterministic: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

impl RunArgs {
    fn load(&self, extra: &str) -> Result<ExperimentConfig, QasError> {
        let mut text = match &self.config {
            Some(p) => fs::read_to_string(p).map_err(|e| QasError::Config(format!("cannot read {}: {e}", p.display())))?,
            None => String::new(),
        };
        if !extra.is_empty() {
            let mut table: toml::Table = text.parse().map_err(|e: toml::de::Error| QasError::Parse(e.to_string()))?;
            let extra: toml::Table = extra.parse().map_err(|e: toml::de::Error| QasError::Parse(e.to_string()))?;
            table.extend(extra);
            text = table.to_string();
        }
        let ov = Overrides { seed: self.seed, agents: self.agents, deterministic: self.deterministic, output_dir: self.out.clone() };
        ExperimentConfig::from_toml(&text, &ov)
    }
}

fn out_dir(cfg: &ExperimentConfig, tag: &str) -> PathBuf {
    cfg.output_dir.clone().unwrap_or_else(|| PathBuf::from("runs").join(format!("{}-n{}-{tag}", cfg.problem.label(), cfg.n)))
}

fn report_path(p: &Path) -> PathBuf {
    if p.is_dir() {
        p.join("report.json")
    } else {
        p.to_path_buf()
    }
}

fn fmt_eta(x: Option<f64>) -> String {
    x.map(|v| format!("{v:.4}")).unwrap_or_else(|| "-".into())
}

fn run(cli: Cli) -> Result<ExitCode, QasError> {
    match cli.cmd {
        Cmd::PrintConfig { run, problem, n } => {
            let mut extra = String::new();
            if let Some(p) = problem {
                extra += &format!("problem = \"{p}\"\n");
            }
            if let Some(n) = n {
                extra += &format!("n = {n}\n");
            }
            print!("{}", run.load(&extra)?.to_toml()?);
        }
        Cmd::Train(args) => {
            let cfg = args.load("")?;
            let dir = out_dir(&cfg, &format!("m{}", cfg.agents));
            let rep = run_training(&cfg)?;
            write_report(&rep, &dir)?;
            for r in &rep.runs {
                let best = r.best.as_ref();
                match r.hit {
                    Some(h) => println!(
                        "seed {}: threshold after {} updates, {} env steps, {} episodes; best eta {} N_2q {} N_par {}",
                        r.seed,
                        h.grad_updates,
                        h.env_steps,
                        h.episodes,
                        fmt_eta(best.map(|b| b.mean_train_eta())),
                        best.map_or(0, |b| b.n_2q),
                        best.map_or(0, |b| b.n_par)
                    ),
                    None => println!("seed {}: threshold not reached in {} episodes; best eta {}", r.seed, r.episodes, fmt_eta(best.map(|b| b.mean_train_eta()))),
                }
            }
            println!("wrote {}", dir.display());
        }
        Cmd::Baseline { run, qaoa, hea } => {
            let extra = match (qaoa, hea) {
                (Some(p), _) => format!("baseline = {{ kind = \"qaoa\", p = {p} }}\n"),
                (_, Some(l)) => format!("baseline = {{ kind = \"hea\", layers = {l} }}\n"),
                _ => String::new(),
            };
            let cfg = run.load(&extra)?;
            let tag = match cfg.baseline {
                Baseline::Qaoa { p } => format!("qaoa-p{p}"),
                Baseline::Hea { layers } => format!("hea-l{layers}"),
                Baseline::None => "baseline".into(),
            };
            let dir = out_dir(&cfg, &tag);
            let rep = run_baseline(&cfg)?;
            write_report(&rep, &dir)?;
            if let Some(b) = rep.best() {
                println!(
                    "{}: eta train {} test {} N_2q {} N_par {}",
                    rep.method.label(),
                    fmt_eta(Some(b.mean_train_eta())),
                    fmt_eta(b.mean_test_eta()),
                    b.n_2q,
                    b.n_par
                );
            }
            println!("wrote {}", dir.display());
        }
        Cmd::Summarize { reports, out } => {
            let reps = reports.iter().map(|p| RunReport::load(&report_path(p))).collect::<Result<Vec<_>, _>>()?;
            let s = summarize(&reps)?;
            print!("{}", s.comparison_csv());
            print!("{}", s.steps_csv());
            if let Some(d) = out {
                s.write(&d)?;
                println!("wrote {}", d.display());
            }
        }
        Cmd::Verify { reports } => {
            let mut failed = false;
            for p in &reports {
                let path = report_path(p);
                let rep = RunReport::load(&path)?;
                let v = verify_report(&rep, path.parent())?;
                if v.mismatches.is_empty() {
                    println!("{}: {} checks ok", path.display(), v.checks);
                } else {
                    failed = true;
                    for m in &v.mismatches {
                        eprintln!("{}: {m}", path.display());
                    }
                }
            }
            if failed {
                return Ok(ExitCode::from(1));
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("marlqas: {e}");
            ExitCode::from(match e {
                QasError::Config(_) | QasError::Parse(_) => 2,
                QasError::Training(_) => 3,
                _ => 1,
            })
        }
    }
}
