use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::{Baseline, ExperimentConfig, Problem};
use super::train::{build_instances, score_circuit, CircuitRecord, LogRow, SeedRun};
use crate::circuit::Circuit;
use crate::env::{Env, Instance};
use crate::error::{config, QasError, Result};
use crate::par;
use crate::problems::{enumerate_cubic_graphs, hea_circuit, qaoa_circuit, split_instances, Graph};
use crate::rng::{derive_seed, Stream};
use crate::vqopt::{approximation_ratio, Energy};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Method {
    Marl { agents: usize },
    Qaoa { p: usize },
    Hea { layers: usize },
}

impl Method {
    pub fn label(self) -> String {
        match self {
            Method::Marl { agents: 1 } => "dqn".into(),
            Method::Marl { agents } => format!("marl-qas m={agents}"),
            Method::Qaoa { p } => format!("qaoa p={p}"),
            Method::Hea { layers } => format!("hea L={layers}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub schema_version: u32,
    pub method: Method,
    pub problem: Problem,
    pub n: usize,
    pub eta_threshold: f64,
    pub train_instances: Vec<String>,
    pub test_instances: Vec<String>,
    pub runs: Vec<SeedRun>,
    pub config: ExperimentConfig,
}

impl RunReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Rejects reports written with another schema version.
    pub fn from_json(text: &str) -> Result<Self> {
        let v: serde_json::Value = serde_json::from_str(text).map_err(|e| QasError::Parse(format!("report is not JSON: {e}")))?;
        match v.get("schema_version").and_then(|s| s.as_u64()) {
            Some(s) if s == SCHEMA_VERSION as u64 => {}
            Some(s) => return Err(QasError::Parse(format!("unsupported report schema version {s}, expected {SCHEMA_VERSION}"))),
            None => return Err(QasError::Parse("report has no schema_version".into())),
        }
        serde_json::from_value(v).map_err(|e| QasError::Parse(format!("malformed report: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self> {
        RunReport::from_json(&fs::read_to_string(path)?)
    }

    /// Best circuit over all runs.
    pub fn best(&self) -> Option<&CircuitRecord> {
        best_of(self.runs.iter().filter_map(|r| r.best.as_ref()))
    }
}

fn best_of<'a>(it: impl Iterator<Item = &'a CircuitRecord>) -> Option<&'a CircuitRecord> {
    it.fold(None, |acc: Option<&CircuitRecord>, r| match acc {
        Some(b) if !r.better_than(b) => Some(b),
        _ => Some(r),
    })
}

/// One search training per seed. Seeds run in parallel unless the config is deterministic.
pub fn run_training(cfg: &ExperimentConfig) -> Result<RunReport> {
    cfg.validate()?;
    let cfg = cfg.effective();
    let (train, test) = build_instances(&cfg)?;
    let labels = |v: &[Instance]| v.iter().map(|i| i.label.clone()).collect::<Vec<_>>();
    let (train_labels, test_labels) = (labels(&train), labels(&test));
    let env = Env::new(cfg.layout()?, cfg.env, train)?;
    let work = || par::map_slice(cfg.exec(), &cfg.seeds, |_, &s| super::train::train_seed(&cfg, &env, &test, s));
    let runs = if cfg.deterministic { par::single_worker(work) } else { work() };
    Ok(RunReport {
        schema_version: SCHEMA_VERSION,
        method: Method::Marl { agents: cfg.agents },
        problem: cfg.problem,
        n: cfg.n,
        eta_threshold: cfg.env.eta_threshold,
        train_instances: train_labels,
        test_instances: test_labels,
        runs: runs.into_iter().collect::<Result<_>>()?,
        config: cfg.clone(),
    })
}

fn graphs_for(cfg: &ExperimentConfig) -> Result<(Vec<Graph>, Vec<Graph>)> {
    let corpus = enumerate_cubic_graphs(cfg.n)?;
    let s = split_instances(&corpus, cfg.corpus.train, cfg.corpus.test, cfg.corpus.split_seed)?;
    Ok((s.train, s.test))
}

/// Evaluates the configured fixed ansatz on every training and test instance.
pub fn run_baseline(cfg: &ExperimentConfig) -> Result<RunReport> {
    cfg.validate()?;
    let cfg = cfg.effective();
    let seed = cfg.seeds[0];
    let opt = cfg.baseline.optimizer(derive_seed(seed, Stream::Baseline, &[]), cfg.exec());
    let (train, test) = build_instances(&cfg)?;
    let thr = cfg.env.eta_threshold;

    let (method, circuit, train_s, test_s) = match cfg.baseline {
        Baseline::None => return config("no baseline configured; set baseline.kind to qaoa or hea"),
        Baseline::Hea { layers } => {
            let c = hea_circuit(cfg.n, layers)?;
            let tr = score_circuit(&c, &train, &opt, opt.seed, cfg.exec())?;
            let te = score_circuit(&c, &test, &opt, derive_seed(opt.seed, Stream::Baseline, &[1]), cfg.exec())?;
            (Method::Hea { layers }, c, tr, te)
        }
        Baseline::Qaoa { p } => {
            let (gtr, gte) = graphs_for(&cfg)?;
            let per_graph = |gs: &[Graph], insts: &[Instance], salt: u64| -> Result<Vec<_>> {
                gs.iter()
                    .zip(insts)
                    .enumerate()
                    .map(|(k, (g, inst))| {
                        let c = qaoa_circuit(g, p)?;
                        let mut s = score_circuit(&c, std::slice::from_ref(inst), &opt, derive_seed(opt.seed, Stream::Baseline, &[salt, k as u64]), cfg.exec())?.remove(0);
                        s.circuit = Some(c.to_text());
                        Ok(s)
                    })
                    .collect()
            };
            let tr = per_graph(&gtr, &train, 0)?;
            let te = per_graph(&gte, &test, 1)?;
            (Method::Qaoa { p }, qaoa_circuit(&gtr[0], p)?, tr, te)
        }
    };
    let satisfactory = train_s.iter().chain(&test_s).all(|s| s.eta >= thr);
    let record = CircuitRecord {
        circuit: circuit.to_text(),
        n_2q: circuit.cnot_count(),
        n_par: circuit.param_count(),
        satisfactory,
        train: train_s,
        test: test_s,
    };
    Ok(RunReport {
        schema_version: SCHEMA_VERSION,
        method,
        problem: cfg.problem,
        n: cfg.n,
        eta_threshold: thr,
        train_instances: train.iter().map(|i| i.label.clone()).collect(),
        test_instances: test.iter().map(|i| i.label.clone()).collect(),
        runs: vec![SeedRun { seed, episodes: 0, env_steps: 0, grad_updates: 0, hit: None, best: Some(record), curve: Vec::new(), trace: None }],
        config: cfg.clone(),
    })
}

/// Training log as CSV: `episode,env_step,epsilon,reward,eta,loss,wall_time`.
pub fn curve_csv(rows: &[LogRow]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r).map_err(|e| QasError::Parse(e.to_string()))?;
    }
    if rows.is_empty() {
        w.write_record(["episode", "env_step", "epsilon", "reward", "eta", "loss", "wall_time"]).map_err(|e| QasError::Parse(e.to_string()))?;
    }
    let bytes = w.into_inner().map_err(|e| QasError::Parse(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| QasError::Parse(e.to_string()))
}

pub fn parse_curve_csv(text: &str) -> Result<Vec<LogRow>> {
    csv::Reader::from_reader(text.as_bytes())
        .deserialize()
        .map(|r| r.map_err(|e| QasError::Parse(format!("training log: {e}"))))
        .collect()
}

/// Writes `report.json`, `config.toml` and per seed `seed-<s>/{training.csv, best_circuit.txt, trace.json}`.
pub fn write_report(report: &RunReport, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join("report.json"), report.to_json()?)?;
    fs::write(dir.join("config.toml"), report.config.to_toml()?)?;
    for run in &report.runs {
        let sub = dir.join(format!("seed-{}", run.seed));
        fs::create_dir_all(&sub)?;
        if matches!(report.method, Method::Marl { .. }) {
            fs::write(sub.join("training.csv"), curve_csv(&run.curve)?)?;
        }
        if let Some(b) = &run.best {
            fs::write(sub.join("best_circuit.txt"), &b.circuit)?;
        }
        if let Some(t) = &run.trace {
            fs::write(sub.join("trace.json"), serde_json::to_string_pretty(t)?)?;
        }
    }
    Ok(())
}

/// Linear-interpolation quantile of sorted data.
pub fn quantile(sorted: &[f64], p: f64) -> Option<f64> {
    if sorted.is_empty() {
        return None;
    }
    let pos = p * (sorted.len() - 1) as f64;
    let (lo, hi) = (pos.floor() as usize, pos.ceil() as usize);
    Some(sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Spread {
    pub median: f64,
    pub q1: f64,
    pub q3: f64,
}

impl Spread {
    pub fn of(values: impl IntoIterator<Item = f64>) -> Option<Spread> {
        let mut v: Vec<f64> = values.into_iter().collect();
        v.sort_by(f64::total_cmp);
        Some(Spread { median: quantile(&v, 0.5)?, q1: quantile(&v, 0.25)?, q3: quantile(&v, 0.75)? })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub problem: Problem,
    pub n: usize,
    pub method: String,
    pub runs: usize,
    pub satisfactory: usize,
    pub eta_train: Option<f64>,
    pub eta_test: Option<f64>,
    pub n_2q: Option<usize>,
    pub n_par: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRow {
    pub problem: Problem,
    pub n: usize,
    pub agents: usize,
    pub seeds: usize,
    pub hits: usize,
    pub grad_updates: Option<Spread>,
    pub env_steps: Option<Spread>,
    pub episodes: Option<Spread>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub schema_version: u32,
    pub comparison: Vec<ComparisonRow>,
    pub steps: Vec<StepRow>,
}

/// Per-`(problem, n, method)` best circuits and per-`(problem, n, m)` step counts to threshold.
pub fn summarize(reports: &[RunReport]) -> Result<Summary> {
    if reports.is_empty() {
        return config("summarize needs at least one report");
    }
    let mut keys: Vec<(Problem, usize, String)> = Vec::new();
    for r in reports {
        let k = (r.problem, r.n, r.method.label());
        if !keys.contains(&k) {
            keys.push(k);
        }
    }
    let comparison = keys
        .into_iter()
        .map(|(problem, n, method)| {
            let group: Vec<&RunReport> = reports.iter().filter(|r| r.problem == problem && r.n == n && r.method.label() == method).collect();
            let records: Vec<&CircuitRecord> = group.iter().flat_map(|r| r.runs.iter().filter_map(|s| s.best.as_ref())).collect();
            let best = best_of(records.iter().copied());
            ComparisonRow {
                problem,
                n,
                method,
                runs: group.iter().map(|r| r.runs.len()).sum(),
                satisfactory: records.iter().filter(|r| r.satisfactory).count(),
                eta_train: best.map(|b| b.mean_train_eta()),
                eta_test: best.and_then(|b| b.mean_test_eta()),
                n_2q: best.map(|b| b.n_2q),
                n_par: best.map(|b| b.n_par),
            }
        })
        .collect();

    let mut step_keys: Vec<(Problem, usize, usize)> = Vec::new();
    for r in reports {
        if let Method::Marl { agents } = r.method {
            if !step_keys.contains(&(r.problem, r.n, agents)) {
                step_keys.push((r.problem, r.n, agents));
            }
        }
    }
    let steps = step_keys
        .into_iter()
        .map(|(problem, n, agents)| {
            let runs: Vec<&SeedRun> = reports
                .iter()
                .filter(|r| r.problem == problem && r.n == n && r.method == Method::Marl { agents })
                .flat_map(|r| &r.runs)
                .collect();
            let hits: Vec<_> = runs.iter().filter_map(|r| r.hit).collect();
            StepRow {
                problem,
                n,
                agents,
                seeds: runs.len(),
                hits: hits.len(),
                grad_updates: Spread::of(hits.iter().map(|h| h.grad_updates as f64)),
                env_steps: Spread::of(hits.iter().map(|h| h.env_steps as f64)),
                episodes: Spread::of(hits.iter().map(|h| h.episodes as f64)),
            }
        })
        .collect();
    Ok(Summary { schema_version: SCHEMA_VERSION, comparison, steps })
}

fn cell<T: ToString>(v: Option<T>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

impl Summary {
    pub fn comparison_csv(&self) -> String {
        let mut s = String::from("problem,n,method,runs,satisfactory,eta_train,eta_test,n_2q,n_par\n");
        for r in &self.comparison {
            s += &format!(
                "{},{},{},{},{},{},{},{},{}\n",
                r.problem.label(),
                r.n,
                r.method,
                r.runs,
                r.satisfactory,
                cell(r.eta_train),
                cell(r.eta_test),
                cell(r.n_2q),
                cell(r.n_par)
            );
        }
        s
    }

    pub fn steps_csv(&self) -> String {
        let mut s = String::from("problem,n,agents,seeds,hits");
        for m in ["grad_updates", "env_steps", "episodes"] {
            s += &format!(",{m}_median,{m}_q1,{m}_q3");
        }
        s.push('\n');
        for r in &self.steps {
            s += &format!("{},{},{},{},{}", r.problem.label(), r.n, r.agents, r.seeds, r.hits);
            for sp in [r.grad_updates, r.env_steps, r.episodes] {
                s += &format!(",{},{},{}", cell(sp.map(|x| x.median)), cell(sp.map(|x| x.q1)), cell(sp.map(|x| x.q3)));
            }
            s.push('\n');
        }
        s
    }

    /// Writes `summary.json`, `comparison.csv` and `steps.csv`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        fs::write(dir.join("summary.json"), serde_json::to_string_pretty(self)?)?;
        fs::write(dir.join("comparison.csv"), self.comparison_csv())?;
        fs::write(dir.join("steps.csv"), self.steps_csv())?;
        Ok(())
    }
}

/// Findings of [`verify_report`]; empty `mismatches` means every check passed.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Verification {
    pub checks: usize,
    pub mismatches: Vec<String>,
}

impl Verification {
    fn check(&mut self, ok: bool, what: impl FnOnce() -> String) {
        self.checks += 1;
        if !ok {
            self.mismatches.push(what());
        }
    }
}

/// Re-derives circuit metrics, ratios and step counts from the persisted
/// circuits, parameters and (when `dir` is given) training logs.
pub fn verify_report(report: &RunReport, dir: Option<&Path>) -> Result<Verification> {
    let (train, test) = build_instances(&report.config)?;
    let mut v = Verification::default();
    let labels = |xs: &[Instance]| xs.iter().map(|i| i.label.clone()).collect::<Vec<_>>();
    v.check(labels(&train) == report.train_instances && labels(&test) == report.test_instances, || "instance sets differ from the configuration".into());

    for run in &report.runs {
        let s = run.seed;
        if let Some(b) = &run.best {
            let c: Circuit = b.circuit.parse()?;
            v.check(c.cnot_count() == b.n_2q, || format!("seed {s}: N_2q {} recorded, {} in circuit", b.n_2q, c.cnot_count()));
            v.check(c.param_count() == b.n_par, || format!("seed {s}: N_par {} recorded, {} in circuit", b.n_par, c.param_count()));
            for (scores, insts) in [(&b.train, &train), (&b.test, &test)] {
                for sc in scores.iter() {
                    let Some(inst) = insts.iter().find(|i| i.label == sc.label) else {
                        v.check(false, || format!("seed {s}: unknown instance {}", sc.label));
                        continue;
                    };
                    let own = match &sc.circuit {
                        Some(t) => t.parse()?,
                        None => c.clone(),
                    };
                    let e = Energy::new(&own, &inst.compiled)?.eval(&sc.params)?;
                    let eta = approximation_ratio(e, &inst.bounds)?;
                    v.check((e - sc.energy).abs() <= 1e-9 * (1.0 + e.abs()), || format!("seed {s}: energy on {} is {e}, recorded {}", sc.label, sc.energy));
                    v.check((eta - sc.eta).abs() <= 1e-9, || format!("seed {s}: eta on {} is {eta}, recorded {}", sc.label, sc.eta));
                }
            }
            let thr = report.eta_threshold;
            let sat = b.train.iter().all(|x| x.eta >= thr) && b.test.len() == test.len() && b.test.iter().all(|x| x.eta >= thr);
            v.check(sat == b.satisfactory, || format!("seed {s}: satisfactory flag {} but ratios say {sat}", b.satisfactory));
        }

        if !matches!(report.method, Method::Marl { .. }) {
            continue;
        }
        let last = run.curve.last();
        v.check(last.map_or(0, |r| r.env_step) == run.env_steps, || format!("seed {s}: curve ends at step {:?}, run has {}", last.map(|r| r.env_step), run.env_steps));
        v.check(run.curve.len() as u64 == run.episodes, || format!("seed {s}: {} curve rows for {} episodes", run.curve.len(), run.episodes));
        if let Some(h) = run.hit {
            let row = run.curve.get(h.episodes as usize - 1);
            let ok = row.is_some_and(|r| r.eta >= report.eta_threshold && r.env_step >= h.env_steps)
                && (h.episodes < 2 || run.curve[h.episodes as usize - 2].env_step < h.env_steps);
            v.check(ok, || format!("seed {s}: threshold hit {h:?} inconsistent with the training curve"));
            v.check(h.grad_updates <= run.grad_updates, || format!("seed {s}: hit after {} updates but run made {}", h.grad_updates, run.grad_updates));
        }
        if let Some(d) = dir {
            let path = d.join(format!("seed-{s}")).join("training.csv");
            match fs::read_to_string(&path) {
                Ok(text) => {
                    let rows = parse_curve_csv(&text)?;
                    v.check(rows == run.curve, || format!("seed {s}: {} differs from the report curve", path.display()));
                }
                Err(e) => v.check(false, || format!("seed {s}: cannot read {}: {e}", path.display())),
            }
            if let Some(b) = &run.best {
                let path = d.join(format!("seed-{s}")).join("best_circuit.txt");
                let on_disk = fs::read_to_string(&path).unwrap_or_default();
                v.check(on_disk == b.circuit, || format!("seed {s}: {} differs from the report circuit", path.display()));
            }
        }
    }
    Ok(v)
}
