//! Inner-loop variational optimization and the approximation ratio.

pub mod cobyla;

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, TAU};

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::circuit::{Circuit, ParamVector};
use crate::error::{config, usage, QasError, Result};
use crate::hamiltonian::{CompiledHamiltonian, PauliHamiltonian, SpectrumBounds};
use crate::par::{self, Exec};
use crate::rng::{stream_rng, Stream};
use crate::statevec::StateVector;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OptMethod {
    #[default]
    DerivativeFree,
    AdamParamshift,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptConfig {
    pub method: OptMethod,
    /// Evaluation budget (derivative-free) or iteration count (ADAM).
    pub max_evals: usize,
    pub restarts: usize,
    pub lr: f64,
    pub seed: u64,
    pub rho_begin: f64,
    pub rho_end: f64,
    pub exec: Exec,
}

impl Default for OptConfig {
    fn default() -> Self {
        OptConfig {
            method: OptMethod::DerivativeFree,
            max_evals: 150,
            restarts: 1,
            lr: 0.1,
            seed: 0,
            rho_begin: FRAC_PI_2,
            rho_end: 1e-3,
            exec: Exec::Parallel,
        }
    }
}

impl OptConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_evals == 0 {
            return config("max_evals must be at least 1");
        }
        if self.restarts == 0 {
            return config("restarts must be at least 1");
        }
        if !(self.rho_begin > 0.0 && self.rho_end > 0.0 && self.rho_end <= self.rho_begin) {
            return config(format!("need 0 < rho_end <= rho_begin, got {} and {}", self.rho_end, self.rho_begin));
        }
        if self.method == OptMethod::AdamParamshift && !(self.lr > 0.0 && self.lr.is_finite()) {
            return config(format!("learning rate must be positive, got {}", self.lr));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptResult {
    pub best_params: ParamVector,
    pub best_energy: f64,
    pub evaluations: usize,
    /// Incumbent energy after each evaluation of the winning restart.
    #[serde(skip)]
    pub history: Vec<f64>,
}

/// `theta -> <0|U(theta)^dag H U(theta)|0>` for a fixed circuit.
pub struct Energy<'a> {
    circuit: &'a Circuit,
    ham: &'a CompiledHamiltonian,
}

impl<'a> Energy<'a> {
    pub fn new(circuit: &'a Circuit, ham: &'a CompiledHamiltonian) -> Result<Self> {
        if circuit.n_qubits() != ham.n_qubits() {
            return usage(format!("circuit has {} qubits but Hamiltonian has {}", circuit.n_qubits(), ham.n_qubits()));
        }
        Ok(Energy { circuit, ham })
    }

    pub fn dim(&self) -> usize {
        self.circuit.n_param_groups()
    }

    pub fn eval(&self, params: &[f64]) -> Result<f64> {
        self.eval_shifted(params, None)
    }

    fn eval_shifted(&self, params: &[f64], shift: Option<(usize, f64)>) -> Result<f64> {
        let mut psi = StateVector::new_zero(self.circuit.n_qubits())?;
        psi.apply_circuit_shifted(self.circuit, params, shift)?;
        self.ham.expectation(&psi)
    }

    /// Shift-rule gradient: each group collects `E(+pi/4) - E(-pi/4)` of every member gate.
    pub fn gradient(&self, params: &[f64]) -> Result<Vec<f64>> {
        let mut grad = vec![0.0; self.dim()];
        for (slot, members) in self.circuit.group_members().iter().enumerate() {
            for &gate in members {
                let plus = self.eval_shifted(params, Some((gate, FRAC_PI_4)))?;
                let minus = self.eval_shifted(params, Some((gate, -FRAC_PI_4)))?;
                grad[slot] += plus - minus;
            }
        }
        Ok(grad)
    }
}

fn random_start(cfg: &OptConfig, restart: usize, dim: usize) -> Vec<f64> {
    let mut rng = stream_rng(cfg.seed, Stream::InnerOptimizer, &[restart as u64]);
    (0..dim).map(|_| rng.random_range(0.0..TAU)).collect()
}

/// Runs `cfg.restarts` independent starts and keeps the lowest energy (lowest index on ties).
fn best_of(cfg: &OptConfig, run: impl Fn(usize) -> Result<OptResult> + Sync + Send) -> Result<OptResult> {
    cfg.validate()?;
    let results = par::map_range(cfg.exec, cfg.restarts, run);
    let mut best: Option<OptResult> = None;
    let mut total = 0;
    for r in results {
        let r = r?;
        total += r.evaluations;
        if best.as_ref().is_none_or(|b| r.best_energy < b.best_energy) {
            best = Some(r);
        }
    }
    let mut best = best.expect("restarts >= 1");
    best.evaluations = total;
    Ok(best)
}

/// Linear-model trust-region minimization from seeded uniform starts in `[0, 2pi)^d`.
pub fn optimize_derivative_free(c: &Circuit, h: &PauliHamiltonian, cfg: &OptConfig) -> Result<OptResult> {
    optimize_compiled(c, &h.compile(), &OptConfig { method: OptMethod::DerivativeFree, ..*cfg })
}

/// ADAM on shift-rule gradients for `cfg.max_evals` iterations.
pub fn optimize_adam_paramshift(c: &Circuit, h: &PauliHamiltonian, cfg: &OptConfig) -> Result<OptResult> {
    optimize_compiled(c, &h.compile(), &OptConfig { method: OptMethod::AdamParamshift, ..*cfg })
}

/// Dispatches on `cfg.method` against a precompiled Hamiltonian.
pub fn optimize_compiled(c: &Circuit, h: &CompiledHamiltonian, cfg: &OptConfig) -> Result<OptResult> {
    let energy = Energy::new(c, h)?;
    if energy.dim() == 0 {
        cfg.validate()?;
        let e = energy.eval(&[])?;
        return Ok(OptResult { best_params: ParamVector::default(), best_energy: e, evaluations: 1, history: vec![e] });
    }
    match cfg.method {
        OptMethod::DerivativeFree => best_of(cfg, |r| derivative_free_run(&energy, cfg, r)),
        OptMethod::AdamParamshift => best_of(cfg, |r| adam_run(&energy, cfg, r)),
    }
}

fn derivative_free_run(energy: &Energy<'_>, cfg: &OptConfig, restart: usize) -> Result<OptResult> {
    let x0 = random_start(cfg, restart, energy.dim());
    let mut failure = None;
    let opts = cobyla::TrustRegionOptions { rho_begin: cfg.rho_begin, rho_end: cfg.rho_end, max_evals: cfg.max_evals };
    let m = cobyla::minimize(
        |x| match energy.eval(x) {
            Ok(e) => e,
            Err(err) => {
                failure.get_or_insert(err);
                f64::NAN
            }
        },
        &x0,
        &opts,
    );
    if let Some(err) = failure {
        return Err(err);
    }
    if !m.f.is_finite() {
        return Err(QasError::Numerical { message: "objective was never finite".into(), residual: f64::NAN });
    }
    Ok(OptResult { best_params: ParamVector(m.x), best_energy: m.f, evaluations: m.evals, history: m.history })
}

const ADAM_BETA1: f64 = 0.9;
const ADAM_BETA2: f64 = 0.999;
const ADAM_EPS: f64 = 1e-8;

fn adam_run(energy: &Energy<'_>, cfg: &OptConfig, restart: usize) -> Result<OptResult> {
    let d = energy.dim();
    let mut x = random_start(cfg, restart, d);
    let (mut m, mut v) = (vec![0.0; d], vec![0.0; d]);
    let mut best = (energy.eval(&x)?, x.clone());
    let mut history = vec![best.0];
    for t in 1..=cfg.max_evals {
        let g = energy.gradient(&x)?;
        let (c1, c2) = (1.0 - ADAM_BETA1.powi(t as i32), 1.0 - ADAM_BETA2.powi(t as i32));
        for i in 0..d {
            m[i] = ADAM_BETA1 * m[i] + (1.0 - ADAM_BETA1) * g[i];
            v[i] = ADAM_BETA2 * v[i] + (1.0 - ADAM_BETA2) * g[i] * g[i];
            x[i] -= cfg.lr * (m[i] / c1) / ((v[i] / c2).sqrt() + ADAM_EPS);
        }
        let e = energy.eval(&x)?;
        if e < best.0 {
            best = (e, x.clone());
        }
        history.push(best.0);
    }
    let evaluations = history.len();
    Ok(OptResult { best_params: ParamVector(best.1), best_energy: best.0, evaluations, history })
}

/// `eta = (lambda_max - E) / (lambda_max - lambda_0)`; values within 1e-9 outside `[0, 1]` are clamped.
pub fn approximation_ratio(e: f64, bounds: &SpectrumBounds) -> Result<f64> {
    let width = bounds.lambda_max - bounds.lambda_min;
    if !(width > 0.0) {
        return Err(QasError::Domain(format!(
            "degenerate spectrum: lambda_min = lambda_max = {}",
            bounds.lambda_min
        )));
    }
    let eta = (bounds.lambda_max - e) / width;
    const TOL: f64 = 1e-9;
    if eta < -TOL || eta > 1.0 + TOL {
        return Err(QasError::Domain(format!("energy {e} outside the spectrum [{}, {}]", bounds.lambda_min, bounds.lambda_max)));
    }
    Ok(eta.clamp(0.0, 1.0))
}
