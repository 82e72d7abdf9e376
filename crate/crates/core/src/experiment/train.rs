use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::config::{ExperimentConfig, Problem};
use crate::circuit::Circuit;
use crate::env::{Env, EnvState, EpisodeTrace, Instance};
use crate::error::Result;
use crate::nn::GruState;
use crate::par::{self, Exec};
use crate::problems::{enumerate_cubic_graphs, maxcut_hamiltonian, schwinger_hamiltonian, split_instances};
use crate::qmix::{epsilon, EpisodeRecord, Learner};
use crate::rng::{derive_seed, stream_rng, Stream};
use crate::vqopt::{approximation_ratio, optimize_compiled, OptConfig};

/// Training and test Hamiltonians for a configuration. Graph instances carry their edge list as label.
pub fn build_instances(cfg: &ExperimentConfig) -> Result<(Vec<Instance>, Vec<Instance>)> {
    match cfg.problem {
        Problem::Schwinger => {
            let h = schwinger_hamiltonian(cfg.n, &cfg.schwinger)?;
            Ok((vec![Instance::new(format!("schwinger-{}", cfg.n), h)?], Vec::new()))
        }
        Problem::MaxcutCubic => {
            let corpus = enumerate_cubic_graphs(cfg.n)?;
            let split = split_instances(&corpus, cfg.corpus.train, cfg.corpus.test, cfg.corpus.split_seed)?;
            let build = |gs: &[crate::problems::Graph]| -> Result<Vec<Instance>> {
                gs.iter().map(|g| Instance::new(g.to_edge_list().trim().replace('\n', ";"), maxcut_hamiltonian(g)?)).collect()
            };
            Ok((build(&split.train)?, build(&split.test)?))
        }
    }
}

/// One row of the training log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogRow {
    pub episode: u64,
    /// Cumulative environment steps at the end of the episode.
    pub env_step: u64,
    /// Exploration rate at the first step of the episode.
    pub epsilon: f64,
    /// Undiscounted episode return.
    pub reward: f64,
    /// Mean training-instance ratio after the last step.
    pub eta: f64,
    /// Mean loss of the updates made during the episode.
    pub loss: Option<f64>,
    pub wall_time: Option<f64>,
}

/// Counters at the step where the first satisfactory circuit appeared (all 1-based except updates).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ThresholdHit {
    pub grad_updates: u64,
    pub env_steps: u64,
    pub episodes: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceScore {
    pub label: String,
    pub eta: f64,
    pub energy: f64,
    pub params: Vec<f64>,
    /// Set when the circuit depends on the instance (QAOA).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub circuit: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CircuitRecord {
    pub circuit: String,
    pub n_2q: usize,
    pub n_par: usize,
    pub satisfactory: bool,
    pub train: Vec<InstanceScore>,
    /// Empty when the problem has no test set or the circuit failed on the training set.
    pub test: Vec<InstanceScore>,
}

impl CircuitRecord {
    pub fn mean_train_eta(&self) -> f64 {
        mean(self.train.iter().map(|s| s.eta))
    }

    pub fn mean_test_eta(&self) -> Option<f64> {
        (!self.test.is_empty()).then(|| mean(self.test.iter().map(|s| s.eta)))
    }

    /// Satisfactory first, then mean test ratio (training ratio without a test set), then fewer CNOTs.
    pub fn better_than(&self, other: &CircuitRecord) -> bool {
        if self.satisfactory != other.satisfactory {
            return self.satisfactory;
        }
        let key = |r: &CircuitRecord| r.mean_test_eta().unwrap_or_else(|| r.mean_train_eta());
        let (a, b) = (key(self), key(other));
        a > b || (a == b && self.n_2q < other.n_2q)
    }
}

pub(crate) fn mean(xs: impl Iterator<Item = f64>) -> f64 {
    let (s, k) = xs.fold((0.0, 0usize), |(s, k), x| (s + x, k + 1));
    if k == 0 {
        f64::NAN
    } else {
        s / k as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedRun {
    pub seed: u64,
    pub episodes: u64,
    pub env_steps: u64,
    pub grad_updates: u64,
    pub hit: Option<ThresholdHit>,
    pub best: Option<CircuitRecord>,
    pub curve: Vec<LogRow>,
    #[serde(skip)]
    pub trace: Option<EpisodeTrace>,
}

/// Optimizes `circuit` for each instance from seeded random starts.
pub fn score_circuit(circuit: &Circuit, instances: &[Instance], inner: &OptConfig, seed: u64, exec: Exec) -> Result<Vec<InstanceScore>> {
    par::map_slice(exec, instances, |k, inst| {
        let cfg = OptConfig { seed: derive_seed(seed, Stream::InnerOptimizer, &[k as u64]), ..*inner };
        let r = optimize_compiled(circuit, &inst.compiled, &cfg)?;
        Ok(InstanceScore {
            label: inst.label.clone(),
            eta: approximation_ratio(r.best_energy, &inst.bounds)?,
            energy: r.best_energy,
            params: r.best_params.0,
            circuit: None,
        })
    })
    .into_iter()
    .collect()
}

fn record_from_state(env: &Env, state: &EnvState) -> CircuitRecord {
    let train = env
        .instances
        .iter()
        .zip(&state.etas)
        .zip(state.energies.iter().zip(&state.params))
        .map(|((inst, &eta), (&energy, p))| InstanceScore { label: inst.label.clone(), eta, energy, params: p.0.clone(), circuit: None })
        .collect();
    CircuitRecord {
        circuit: state.circuit.to_text(),
        n_2q: state.circuit.cnot_count(),
        n_par: state.circuit.param_count(),
        satisfactory: false,
        train,
        test: Vec::new(),
    }
}

/// One complete training run for `seed`.
pub fn train_seed(cfg: &ExperimentConfig, env: &Env, test: &[Instance], seed: u64) -> Result<SeedRun> {
    let lay = env.layout;
    let thr = env.cfg.eta_threshold;
    let mut learner = Learner::new(cfg.trainer, lay.obs_dim(), lay.state_dim(), lay.n_actions(), seed)?;
    let mut explore = stream_rng(seed, Stream::Exploration, &[]);
    let mut replay = stream_rng(seed, Stream::Replay, &[]);
    let clock = Instant::now();

    let mut run = SeedRun { seed, episodes: 0, env_steps: 0, grad_updates: 0, hit: None, best: None, curve: Vec::new(), trace: None };
    for episode in 0..cfg.episodes {
        let mut state = env.reset(derive_seed(seed, Stream::Env, &[episode]))?;
        let mut hidden = vec![GruState::zeros(cfg.trainer.hidden); lay.m];
        let mut obs = env.observations(&state);
        let mut rec = EpisodeRecord { states: vec![env.global_state(&state)], observations: vec![obs.clone()], actions: Vec::new(), rewards: Vec::new(), dones: Vec::new() };
        let mut trace = EpisodeTrace { seed: state.seed, steps: Vec::new(), circuit: String::new() };
        let eps0 = epsilon(&cfg.trainer, run.env_steps);
        let (mut ret, mut losses) = (0.0, Vec::new());

        while !state.done {
            let eps = epsilon(&cfg.trainer, run.env_steps);
            let actions = learner.act(&obs, &mut hidden, eps, &mut explore)?;
            let out = env.step(&mut state, &actions)?;
            run.env_steps += 1;
            ret += out.reward;
            obs = env.observations(&state);
            rec.actions.push(actions);
            rec.rewards.push(out.reward);
            rec.dones.push(out.done);
            rec.states.push(env.global_state(&state));
            rec.observations.push(obs.clone());
            trace.steps.push(out);

            let mut cand = record_from_state(env, &state);
            if state.etas.iter().all(|&e| e >= thr) {
                let tseed = derive_seed(seed, Stream::InnerOptimizer, &[u64::MAX, episode, state.t as u64]);
                cand.test = score_circuit(&state.circuit, test, &env.cfg.inner, tseed, env.cfg.inner.exec)?;
                cand.satisfactory = cand.test.iter().all(|s| s.eta >= thr);
            }
            if cand.satisfactory && run.hit.is_none() {
                run.hit = Some(ThresholdHit { grad_updates: learner.grad_updates, env_steps: run.env_steps, episodes: episode + 1 });
            }
            if run.best.as_ref().is_none_or(|b| cand.better_than(b)) {
                run.best = Some(cand);
                run.trace = Some(EpisodeTrace { circuit: state.circuit.to_text(), ..trace.clone() });
            }

            if let Some(l) = learner.train_step(&mut replay)? {
                losses.push(l);
            }
        }
        learner.store(rec)?;
        run.episodes = episode + 1;
        learner.sync_target(run.episodes);
        run.curve.push(LogRow {
            episode,
            env_step: run.env_steps,
            epsilon: eps0,
            reward: ret,
            eta: state.eta,
            loss: (!losses.is_empty()).then(|| mean(losses.iter().copied())),
            wall_time: (!cfg.deterministic).then(|| clock.elapsed().as_secs_f64()),
        });
        if cfg.stop_at_threshold && run.hit.is_some() {
            break;
        }
    }
    run.grad_updates = learner.grad_updates;
    Ok(run)
}
