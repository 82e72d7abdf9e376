//! Derivative-free minimization by linear approximation in a trust region.
//!
//! This is the unconstrained core of Powell's COBYLA: a simplex of `d + 1`
//! points defines a linear interpolation model, the model is minimized inside
//! a ball of radius `rho`, and `rho` is halved whenever a step fails to give
//! a useful reduction while the simplex is well shaped. Geometry-improving
//! steps keep the simplex from collapsing.

use nalgebra::{DMatrix, DVector};

/// Geometry constants, named as in Powell's description.
const ALPHA: f64 = 0.25;
const GAMMA: f64 = 0.5;
const DELTA: f64 = 1.1;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrustRegionOptions {
    pub rho_begin: f64,
    pub rho_end: f64,
    pub max_evals: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub f: f64,
    pub evals: usize,
    /// Incumbent (best-so-far) value after every evaluation.
    pub history: Vec<f64>,
}

struct Simplex<F> {
    f: F,
    points: Vec<Vec<f64>>,
    values: Vec<f64>,
    pole: usize,
    evals: usize,
    history: Vec<f64>,
}

impl<F: FnMut(&[f64]) -> f64> Simplex<F> {
    fn eval(&mut self, x: &[f64]) -> f64 {
        let v = (self.f)(x);
        let v = if v.is_finite() { v } else { f64::INFINITY };
        self.evals += 1;
        let best = self.history.last().copied().unwrap_or(f64::INFINITY).min(v);
        self.history.push(best);
        v
    }

    /// Rows are the edge vectors `y_j - y_pole` for every non-pole vertex.
    fn edges(&self) -> (DMatrix<f64>, Vec<usize>) {
        let d = self.points[0].len();
        let idx: Vec<usize> = (0..self.points.len()).filter(|&j| j != self.pole).collect();
        let p = &self.points[self.pole];
        let a = DMatrix::from_fn(d, d, |r, c| self.points[idx[r]][c] - p[c]);
        (a, idx)
    }

    fn update_pole(&mut self) {
        for j in 0..self.values.len() {
            if self.values[j] < self.values[self.pole] {
                self.pole = j;
            }
        }
    }
}

/// Minimizes `f` from `x0`. Always evaluates the initial simplex, then stops
/// once `rho` would drop below `rho_end` or `max_evals` is reached.
pub fn minimize<F: FnMut(&[f64]) -> f64>(f: F, x0: &[f64], opts: &TrustRegionOptions) -> Minimum {
    let d = x0.len();
    let mut s = Simplex { f, points: Vec::with_capacity(d + 1), values: Vec::new(), pole: 0, evals: 0, history: Vec::new() };
    let f0 = s.eval(x0);
    s.points.push(x0.to_vec());
    s.values.push(f0);
    if d == 0 {
        return Minimum { x: Vec::new(), f: f0, evals: s.evals, history: s.history };
    }
    let mut rho = opts.rho_begin;
    for k in 0..d {
        let mut y = x0.to_vec();
        y[k] += rho;
        let v = s.eval(&y);
        s.points.push(y);
        s.values.push(v);
    }
    s.update_pole();

    while s.evals < opts.max_evals {
        let (a, idx) = s.edges();
        let Some(inv) = a.clone().try_inverse() else {
            rebuild(&mut s, rho);
            continue;
        };
        // Columns of `inv` are normals to the faces opposite each vertex.
        let face_dist: Vec<f64> = (0..d).map(|j| 1.0 / inv.column(j).norm()).collect();
        let edge_len: Vec<f64> = (0..d).map(|j| a.row(j).norm()).collect();

        let fp = s.values[s.pole];
        let df = DVector::from_iterator(d, idx.iter().map(|&j| s.values[j] - fp));
        let grad = &inv * &df;
        let gnorm = grad.norm();

        // Geometry check: vertices too far from the pole or too close to
        // their opposite face get replaced before trusting the model.
        let far = (0..d).filter(|&j| edge_len[j] > DELTA * rho).max_by(|&i, &j| edge_len[i].total_cmp(&edge_len[j]));
        let flat = (0..d).filter(|&j| face_dist[j] < ALPHA * rho).min_by(|&i, &j| face_dist[i].total_cmp(&face_dist[j]));
        if let Some(l) = far.or(flat) {
            let normal = inv.column(l) / inv.column(l).norm();
            let sign = if gnorm > 0.0 && grad.dot(&normal) > 0.0 { -1.0 } else { 1.0 };
            let step = normal * (sign * GAMMA * rho);
            let y: Vec<f64> = s.points[s.pole].iter().zip(step.iter()).map(|(p, t)| p + t).collect();
            let v = s.eval(&y);
            s.points[idx[l]] = y;
            s.values[idx[l]] = v;
            s.update_pole();
            continue;
        }

        if gnorm <= f64::EPSILON * fp.abs().max(1.0) {
            if !shrink(&mut rho, opts.rho_end) {
                break;
            }
            continue;
        }

        let step = &grad * (-rho / gnorm);
        let trial: Vec<f64> = s.points[s.pole].iter().zip(step.iter()).map(|(p, t)| p + t).collect();
        let ft = s.eval(&trial);
        let predicted = rho * gnorm;
        let ratio = (fp - ft) / predicted;

        // Replace the vertex whose swap keeps the simplex volume largest,
        // preferring vertices that ended up far from the new point.
        let sigma: Vec<f64> = (0..d).map(|j| inv.column(j).dot(&step).abs()).collect();
        let dist_to_trial: Vec<f64> = idx
            .iter()
            .map(|&j| s.points[j].iter().zip(&trial).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt())
            .collect();
        let l = (0..d)
            .max_by(|&i, &j| {
                let wi = sigma[i] * (dist_to_trial[i] / rho).max(1.0).powi(3);
                let wj = sigma[j] * (dist_to_trial[j] / rho).max(1.0).powi(3);
                wi.total_cmp(&wj).then(j.cmp(&i))
            })
            .expect("d > 0");
        if sigma[l] > 1e-12 || ft < fp {
            s.points[idx[l]] = trial;
            s.values[idx[l]] = ft;
            s.update_pole();
        }

        if ratio <= 0.1 && !shrink(&mut rho, opts.rho_end) {
            break;
        }
    }

    let x = s.points[s.pole].clone();
    let f = s.values[s.pole];
    Minimum { x, f, evals: s.evals, history: s.history }
}

/// Halves the radius (snapping to `rho_end` near the end); false once exhausted.
fn shrink(rho: &mut f64, rho_end: f64) -> bool {
    if *rho <= rho_end {
        return false;
    }
    *rho *= 0.5;
    if *rho <= 1.5 * rho_end {
        *rho = rho_end;
    }
    true
}

/// Re-seeds a degenerate simplex around the pole with axis steps of length `rho`.
fn rebuild<F: FnMut(&[f64]) -> f64>(s: &mut Simplex<F>, rho: f64) {
    let pole = s.points[s.pole].clone();
    let fp = s.values[s.pole];
    let d = pole.len();
    s.points = vec![pole.clone()];
    s.values = vec![fp];
    s.pole = 0;
    for k in 0..d {
        let mut y = pole.clone();
        y[k] += rho;
        let v = s.eval(&y);
        s.points.push(y);
        s.values.push(v);
    }
    s.update_pole();
}
