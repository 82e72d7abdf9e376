//! Circuit-building environment.
//!
//! Each agent owns a contiguous block of `q` qubits and emits one token per
//! step: `a = k q + l` places gate kind `k` (`RX`, `RY`, `CNOT` to the left
//! neighbour, `CNOT` to the right neighbour) on local qubit `l`, and `4q`
//! skips. After the joint action the circuit is re-optimized from a fresh
//! random start for every problem instance and rewarded with `2 eta - rho t`.

use serde::{Deserialize, Serialize};

use crate::circuit::{Circuit, GateOp, ParamVector};
use crate::error::{config, usage, QasError, Result};
use crate::hamiltonian::{CompiledHamiltonian, PauliHamiltonian, SpectrumBounds};
use crate::par;
use crate::rng::{derive_seed, Stream};
use crate::vqopt::{approximation_ratio, optimize_compiled, OptConfig, OptResult};

/// Number of gate kinds an agent can place.
pub const GATE_KINDS: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SystemLayout {
    pub n: usize,
    pub m: usize,
    pub q: usize,
}

impl SystemLayout {
    pub fn new(n: usize, m: usize) -> Result<Self> {
        if n == 0 || m == 0 || n % m != 0 {
            return config(format!("{m} agents cannot evenly split {n} qubits"));
        }
        Ok(SystemLayout { n, m, q: n / m })
    }

    /// `4q + 1`, the last token being the skip.
    pub fn n_actions(&self) -> usize {
        GATE_KINDS * self.q + 1
    }

    pub fn skip_token(&self) -> usize {
        GATE_KINDS * self.q
    }

    pub fn obs_dim(&self) -> usize {
        self.n_actions() + 1 + GATE_KINDS + self.m
    }

    /// Every agent's observation without its step entry, then `t/T` and the CNOT count over `T`.
    pub fn state_dim(&self) -> usize {
        self.m * (self.obs_dim() - 1) + 2
    }
}

/// Gate for agent `agent`'s token, or `None` for the skip token.
pub fn decode_action(token: usize, agent: usize, layout: &SystemLayout) -> Result<Option<GateOp>> {
    if agent >= layout.m {
        return usage(format!("agent {agent} out of range for {} agents", layout.m));
    }
    if token > layout.skip_token() {
        return usage(format!("token {token} exceeds skip token {}", layout.skip_token()));
    }
    if token == layout.skip_token() {
        return Ok(None);
    }
    let (k, l) = (token / layout.q, token % layout.q);
    let j = agent * layout.q + l;
    let n = layout.n;
    Ok(Some(match k {
        0 => GateOp::rx(j),
        1 => GateOp::ry(j),
        2 => GateOp::cnot(j, (j + n - 1) % n),
        _ => GateOp::cnot(j, (j + 1) % n),
    }))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RewardMode {
    #[default]
    SingleInstance,
    AveragedInstances,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnvConfig {
    pub rho: f64,
    pub max_steps: usize,
    pub eta_threshold: f64,
    pub reward_mode: RewardMode,
    pub inner: OptConfig,
    /// All rotations placed in one step share a single new parameter.
    pub share_params_per_step: bool,
}

impl Default for EnvConfig {
    fn default() -> Self {
        EnvConfig {
            rho: 0.01,
            max_steps: 15,
            eta_threshold: 0.95,
            reward_mode: RewardMode::SingleInstance,
            inner: OptConfig::default(),
            share_params_per_step: false,
        }
    }
}

impl EnvConfig {
    /// Step limit used when none is configured: 15 up to 6 qubits, 25 up to 10, else 40.
    pub fn default_max_steps(n: usize) -> usize {
        match n {
            0..=6 => 15,
            7..=10 => 25,
            _ => 40,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.eta_threshold) {
            return config(format!("eta_threshold must be in [0, 1], got {}", self.eta_threshold));
        }
        if self.max_steps == 0 {
            return config("max_steps must be at least 1");
        }
        if !self.rho.is_finite() || self.rho < 0.0 {
            return config(format!("rho must be a non-negative number, got {}", self.rho));
        }
        self.inner.validate()
    }
}

/// One Hamiltonian with its precomputed spectrum bounds.
#[derive(Debug, Clone)]
pub struct Instance {
    pub label: String,
    pub hamiltonian: PauliHamiltonian,
    pub compiled: CompiledHamiltonian,
    pub bounds: SpectrumBounds,
}

impl Instance {
    pub fn new(label: impl Into<String>, hamiltonian: PauliHamiltonian) -> Result<Self> {
        let bounds = hamiltonian.extreme_eigenvalues()?;
        if !(bounds.lambda_max > bounds.lambda_min) {
            return Err(QasError::Domain(format!("instance has a degenerate spectrum at {}", bounds.lambda_min)));
        }
        Ok(Instance { label: label.into(), compiled: hamiltonian.compile(), hamiltonian, bounds })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnvState {
    pub t: usize,
    pub circuit: Circuit,
    pub last_actions: Vec<usize>,
    /// Gates placed by each agent, by kind.
    pub counts: Vec<[usize; GATE_KINDS]>,
    pub done: bool,
    pub eta: f64,
    pub etas: Vec<f64>,
    pub energies: Vec<f64>,
    pub params: Vec<ParamVector>,
    pub seed: u64,
}

impl EnvState {
    pub fn cnot_count(&self) -> usize {
        self.circuit.cnot_count()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepOutcome {
    pub reward: f64,
    pub done: bool,
    pub eta: f64,
    pub etas: Vec<f64>,
    pub tokens: Vec<usize>,
    pub gates: Vec<Option<String>>,
    pub evaluations: usize,
    pub retried: bool,
}

/// Per-step debugging record written as JSON.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EpisodeTrace {
    pub seed: u64,
    pub steps: Vec<StepOutcome>,
    pub circuit: String,
}

#[derive(Debug, Clone)]
pub struct Env {
    pub layout: SystemLayout,
    pub cfg: EnvConfig,
    pub instances: Vec<Instance>,
}

impl Env {
    pub fn new(layout: SystemLayout, cfg: EnvConfig, instances: Vec<Instance>) -> Result<Self> {
        cfg.validate()?;
        if instances.is_empty() {
            return config("environment needs at least one problem instance");
        }
        if let Some(bad) = instances.iter().find(|i| i.hamiltonian.n_qubits() != layout.n) {
            return config(format!("instance `{}` has {} qubits, layout has {}", bad.label, bad.hamiltonian.n_qubits(), layout.n));
        }
        if cfg.reward_mode == RewardMode::SingleInstance && instances.len() != 1 {
            return config(format!("single-instance reward with {} instances", instances.len()));
        }
        Ok(Env { layout, cfg, instances })
    }

    pub fn reset(&self, seed: u64) -> Result<EnvState> {
        let m = self.layout.m;
        Ok(EnvState {
            t: 0,
            circuit: Circuit::new(self.layout.n)?,
            last_actions: vec![self.layout.skip_token(); m],
            counts: vec![[0; GATE_KINDS]; m],
            done: false,
            eta: 0.0,
            etas: Vec::new(),
            energies: Vec::new(),
            params: Vec::new(),
            seed,
        })
    }

    pub fn observation(&self, state: &EnvState, agent: usize) -> Vec<f64> {
        let lay = &self.layout;
        let big_t = self.cfg.max_steps as f64;
        let mut o = vec![0.0; lay.obs_dim()];
        o[state.last_actions[agent]] = 1.0;
        let base = lay.n_actions();
        o[base] = state.t as f64 / big_t;
        for (k, &c) in state.counts[agent].iter().enumerate() {
            o[base + 1 + k] = c as f64 / big_t;
        }
        o[base + 1 + GATE_KINDS + agent] = 1.0;
        o
    }

    pub fn observations(&self, state: &EnvState) -> Vec<Vec<f64>> {
        (0..self.layout.m).map(|i| self.observation(state, i)).collect()
    }

    pub fn global_state(&self, state: &EnvState) -> Vec<f64> {
        let step_idx = self.layout.n_actions();
        let mut s = Vec::with_capacity(self.layout.state_dim());
        for i in 0..self.layout.m {
            let o = self.observation(state, i);
            s.extend(o.iter().enumerate().filter(|&(k, _)| k != step_idx).map(|(_, v)| *v));
        }
        let big_t = self.cfg.max_steps as f64;
        s.push(state.t as f64 / big_t);
        s.push(state.cnot_count() as f64 / big_t);
        s
    }

    /// Applies the joint action, re-optimizes every instance and returns the reward.
    pub fn step(&self, state: &mut EnvState, tokens: &[usize]) -> Result<StepOutcome> {
        if state.done {
            return usage("episode already finished; reset first");
        }
        if tokens.len() != self.layout.m {
            return usage(format!("expected {} tokens, got {}", self.layout.m, tokens.len()));
        }
        let decoded: Vec<Option<GateOp>> =
            tokens.iter().enumerate().map(|(i, &a)| decode_action(a, i, &self.layout)).collect::<Result<_>>()?;

        let mut shared = None;
        for (i, gate) in decoded.iter().enumerate() {
            let Some(g) = gate else { continue };
            let share = if self.cfg.share_params_per_step && g.kind.is_rotation() { shared } else { None };
            let slot = state.circuit.append(*g, share)?;
            if self.cfg.share_params_per_step && slot.is_some() {
                shared = slot;
            }
            state.counts[i][tokens[i] / self.layout.q] += 1;
        }
        state.circuit.mark_step();
        state.last_actions = tokens.to_vec();
        state.t += 1;

        let (results, retried) = match self.optimize_all(state, 0) {
            Ok(r) => (r, false),
            Err(_) => (self.optimize_all(state, 1).map_err(|e| QasError::Training(format!("inner optimization failed twice at step {}: {e}", state.t)))?, true),
        };
        let etas: Vec<f64> = results
            .iter()
            .zip(&self.instances)
            .map(|(r, inst)| approximation_ratio(r.best_energy, &inst.bounds))
            .collect::<Result<_>>()?;
        let eta = etas.iter().sum::<f64>() / etas.len() as f64;
        let reward = 2.0 * eta - self.cfg.rho * state.t as f64;
        state.done = eta >= self.cfg.eta_threshold || state.t >= self.cfg.max_steps;
        state.eta = eta;
        state.energies = results.iter().map(|r| r.best_energy).collect();
        state.params = results.iter().map(|r| r.best_params.clone()).collect();
        state.etas = etas.clone();

        Ok(StepOutcome {
            reward,
            done: state.done,
            eta,
            etas,
            tokens: tokens.to_vec(),
            gates: decoded.iter().map(|g| g.map(|g| g.to_string())).collect(),
            evaluations: results.iter().map(|r| r.evaluations).sum(),
            retried,
        })
    }

    fn optimize_all(&self, state: &EnvState, attempt: u64) -> Result<Vec<OptResult>> {
        let circuit = &state.circuit;
        let outs = par::map_slice(self.cfg.inner.exec, &self.instances, |k, inst| {
            let seed = derive_seed(state.seed, Stream::InnerOptimizer, &[k as u64, state.t as u64, attempt]);
            optimize_compiled(circuit, &inst.compiled, &OptConfig { seed, ..self.cfg.inner })
        });
        outs.into_iter().collect()
    }
}
