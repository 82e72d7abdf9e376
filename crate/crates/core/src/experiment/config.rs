use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::env::{EnvConfig, RewardMode, SystemLayout};
use crate::error::{config, QasError, Result};
use crate::par::Exec;
use crate::problems::SchwingerParams;
use crate::qmix::{MixerKind, TrainerConfig};
use crate::vqopt::{OptConfig, OptMethod};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Problem {
    #[default]
    MaxcutCubic,
    Schwinger,
}

impl Problem {
    pub fn label(self) -> &'static str {
        match self {
            Problem::MaxcutCubic => "maxcut_cubic",
            Problem::Schwinger => "schwinger",
        }
    }
}

/// Fixed-structure ansatz evaluated instead of (or next to) a search run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Baseline {
    #[default]
    None,
    Qaoa { p: usize },
    Hea { layers: usize },
}

impl Baseline {
    /// QAOA: derivative-free, best of 5. HEA: ADAM with shift-rule gradients, lr 0.1, 200 iterations, best of 3.
    pub fn optimizer(self, seed: u64, exec: Exec) -> OptConfig {
        match self {
            Baseline::Hea { .. } => OptConfig {
                method: OptMethod::AdamParamshift,
                max_evals: 200,
                restarts: 3,
                lr: 0.1,
                seed,
                exec,
                ..OptConfig::default()
            },
            _ => OptConfig { method: OptMethod::DerivativeFree, max_evals: 500, restarts: 5, seed, exec, ..OptConfig::default() },
        }
    }
}

/// Number of training and test graphs drawn from the cubic corpus.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorpusConfig {
    pub train: usize,
    pub test: usize,
    pub split_seed: u64,
}

impl CorpusConfig {
    pub fn for_size(n: usize) -> Self {
        let (train, test) = match n {
            0..=4 => (1, 0),
            5..=6 => (1, 1),
            7..=8 => (3, 2),
            9..=10 => (12, 7),
            _ => (70, 15),
        };
        CorpusConfig { train, test, split_seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub problem: Problem,
    pub n: usize,
    pub agents: usize,
    pub seeds: Vec<u64>,
    /// Training budget per seed.
    pub episodes: u64,
    /// End a seed's run after the episode in which a satisfactory circuit first appears.
    pub stop_at_threshold: bool,
    /// Single worker, sequential inner loops, no wall-clock column.
    pub deterministic: bool,
    pub trainer: TrainerConfig,
    pub env: EnvConfig,
    pub corpus: CorpusConfig,
    pub schwinger: SchwingerParams,
    pub baseline: Baseline,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
}

/// Command-line values that take precedence over the file.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub agents: Option<usize>,
    pub deterministic: bool,
    pub output_dir: Option<PathBuf>,
}

/// 5 seeds up to 6 qubits, 10 up to 10, then 25.
pub fn default_seed_count(n: usize) -> u64 {
    match n {
        0..=6 => 5,
        7..=10 => 10,
        _ => 25,
    }
}

impl ExperimentConfig {
    /// Every default for a given problem size, as dumped by `print-config`.
    pub fn defaults_for(problem: Problem, n: usize, agents: usize) -> Self {
        let corpus = CorpusConfig::for_size(n);
        let multi = problem == Problem::MaxcutCubic && corpus.train > 1;
        let env = EnvConfig {
            max_steps: EnvConfig::default_max_steps(n),
            reward_mode: if multi { RewardMode::AveragedInstances } else { RewardMode::SingleInstance },
            share_params_per_step: problem == Problem::MaxcutCubic,
            ..EnvConfig::default()
        };
        let trainer = TrainerConfig {
            n_agents: agents,
            mixer: if agents == 1 { MixerKind::Identity } else { MixerKind::Qmix },
            ..TrainerConfig::default()
        };
        ExperimentConfig {
            problem,
            n,
            agents,
            seeds: (0..default_seed_count(n)).collect(),
            episodes: 1000,
            stop_at_threshold: false,
            deterministic: false,
            trainer,
            env,
            corpus,
            schwinger: SchwingerParams::default(),
            baseline: Baseline::None,
            output_dir: None,
        }
    }

    /// Parses a TOML file over the defaults implied by its `problem`, `n` and `agents` keys.
    pub fn from_toml(text: &str, ov: &Overrides) -> Result<Self> {
        let mut user: toml::Table = text.parse().map_err(|e: toml::de::Error| QasError::Parse(e.to_string()))?;
        if let Some(m) = ov.agents {
            user.insert("agents".into(), toml::Value::Integer(m as i64));
            if let Some(toml::Value::Table(t)) = user.get_mut("trainer") {
                t.remove("n_agents");
                t.remove("mixer");
            }
        }
        if let Some(s) = ov.seed {
            user.insert("seeds".into(), toml::Value::Array(vec![toml::Value::Integer(s as i64)]));
        }
        if ov.deterministic {
            user.insert("deterministic".into(), toml::Value::Boolean(true));
        }
        if let Some(dir) = &ov.output_dir {
            user.insert("output_dir".into(), toml::Value::String(dir.display().to_string()));
        }

        let problem: Problem = match user.get("problem") {
            Some(v) => v.clone().try_into().map_err(|e: toml::de::Error| QasError::Parse(format!("problem: {e}")))?,
            None => Problem::default(),
        };
        let n = read_usize(&user, "n")?.unwrap_or(4);
        let agents = read_usize(&user, "agents")?.unwrap_or(n);
        let defaults = ExperimentConfig::defaults_for(problem, n, agents);
        let mut merged = toml::Table::try_from(&defaults).map_err(|e| QasError::Parse(e.to_string()))?;
        merge(&mut merged, user);
        let cfg: ExperimentConfig = toml::Value::Table(merged).try_into().map_err(|e: toml::de::Error| QasError::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| QasError::Parse(e.to_string()))
    }

    pub fn layout(&self) -> Result<SystemLayout> {
        SystemLayout::new(self.n, self.agents)
    }

    pub fn validate(&self) -> Result<()> {
        match self.problem {
            Problem::MaxcutCubic if !(4..=12).contains(&self.n) || self.n % 2 == 1 => {
                return config(format!("cubic Max-Cut needs an even n in 4..=12, got {}", self.n));
            }
            Problem::Schwinger if self.n < 2 || self.n % 2 == 1 => {
                return config(format!("Schwinger model needs an even n >= 2, got {}", self.n));
            }
            _ => {}
        }
        self.layout()?;
        if self.seeds.is_empty() {
            return config("at least one seed is required");
        }
        if self.trainer.n_agents != self.agents {
            return config(format!("trainer.n_agents = {} but agents = {}", self.trainer.n_agents, self.agents));
        }
        self.trainer.validate()?;
        self.env.validate()?;
        if self.problem == Problem::MaxcutCubic {
            let multi = self.corpus.train > 1;
            if multi != (self.env.reward_mode == RewardMode::AveragedInstances) {
                return config(format!("{} training graphs need reward_mode = {}", self.corpus.train, if multi { "averaged_instances" } else { "single_instance" }));
            }
            if self.corpus.train == 0 {
                return config("corpus.train must be at least 1");
            }
        } else if self.env.reward_mode != RewardMode::SingleInstance {
            return config("the Schwinger problem has a single instance");
        }
        match self.baseline {
            Baseline::Qaoa { p: 0 } => config("QAOA depth p must be at least 1"),
            Baseline::Hea { layers: 0 } => config("HEA needs at least one layer"),
            Baseline::Qaoa { .. } if self.problem != Problem::MaxcutCubic => config("QAOA baseline is defined for Max-Cut only"),
            _ => Ok(()),
        }
    }

    /// Copy with every execution strategy forced to sequential when `deterministic` is set.
    pub fn effective(&self) -> Self {
        let mut c = self.clone();
        if c.deterministic {
            c.trainer.exec = Exec::Sequential;
            c.env.inner.exec = Exec::Sequential;
        }
        c
    }

    pub fn exec(&self) -> Exec {
        if self.deterministic {
            Exec::Sequential
        } else {
            Exec::Parallel
        }
    }
}

fn read_usize(t: &toml::Table, key: &str) -> Result<Option<usize>> {
    match t.get(key) {
        None => Ok(None),
        Some(toml::Value::Integer(v)) if *v >= 0 => Ok(Some(*v as usize)),
        Some(v) => Err(QasError::Parse(format!("{key} must be a non-negative integer, got {v}"))),
    }
}

fn merge(base: &mut toml::Table, over: toml::Table) {
    for (k, v) in over {
        match (base.get_mut(&k), v) {
            (Some(toml::Value::Table(b)), toml::Value::Table(o)) if k != "baseline" => merge(b, o),
            (_, v) => {
                base.insert(k, v);
            }
        }
    }
}
