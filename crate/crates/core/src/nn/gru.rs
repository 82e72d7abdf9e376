use serde::{Deserialize, Serialize};

use super::{sigmoid, Parameters, Tensor2};
use crate::error::{usage, Result};
use crate::rng::Rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GruState {
    pub hidden: Vec<f64>,
}

impl GruState {
    pub fn zeros(width: usize) -> Self {
        GruState { hidden: vec![0.0; width] }
    }
}

/// Gated recurrent unit:
///
/// ```text
/// z  = sigmoid(W_z x + U_z h + b_z)
/// r  = sigmoid(W_r x + U_r h + b_r)
/// h~ = tanh(W_h x + U_h (r * h) + b_h)
/// h' = (1 - z) * h + z * h~
/// ```
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Gru {
    pub w_z: Tensor2,
    pub u_z: Tensor2,
    pub b_z: Vec<f64>,
    pub w_r: Tensor2,
    pub u_r: Tensor2,
    pub b_r: Vec<f64>,
    pub w_h: Tensor2,
    pub u_h: Tensor2,
    pub b_h: Vec<f64>,
}

/// Activations saved by [`Gru::forward`] for the backward pass.
#[derive(Debug, Clone)]
pub struct GruCache {
    x: Vec<f64>,
    h: Vec<f64>,
    z: Vec<f64>,
    r: Vec<f64>,
    rh: Vec<f64>,
    cand: Vec<f64>,
}

impl Gru {
    pub fn zeros(inputs: usize, hidden: usize) -> Self {
        let w = || Tensor2::zeros(hidden, inputs);
        let u = || Tensor2::zeros(hidden, hidden);
        Gru {
            w_z: w(),
            u_z: u(),
            b_z: vec![0.0; hidden],
            w_r: w(),
            u_r: u(),
            b_r: vec![0.0; hidden],
            w_h: w(),
            u_h: u(),
            b_h: vec![0.0; hidden],
        }
    }

    pub fn init(inputs: usize, hidden: usize, rng: &mut Rng) -> Self {
        let mut g = Gru::zeros(inputs, hidden);
        for t in [&mut g.w_z, &mut g.w_r, &mut g.w_h] {
            *t = Tensor2::uniform(hidden, inputs, rng);
        }
        for t in [&mut g.u_z, &mut g.u_r, &mut g.u_h] {
            *t = Tensor2::uniform(hidden, hidden, rng);
        }
        g
    }

    pub fn inputs(&self) -> usize {
        self.w_z.cols
    }

    pub fn hidden(&self) -> usize {
        self.b_z.len()
    }

    pub fn forward(&self, x: &[f64], state: &GruState) -> Result<(GruState, GruCache)> {
        if x.len() != self.inputs() || state.hidden.len() != self.hidden() {
            return usage(format!(
                "GRU {}->{} got input {} and hidden {}",
                self.inputs(),
                self.hidden(),
                x.len(),
                state.hidden.len()
            ));
        }
        let h = &state.hidden;
        let gate = |w: &Tensor2, u: &Tensor2, b: &[f64], hv: &[f64]| -> Vec<f64> {
            let (a, c) = (w.matvec(x), u.matvec(hv));
            a.iter().zip(&c).zip(b).map(|((a, c), b)| a + c + b).collect()
        };
        let z: Vec<f64> = gate(&self.w_z, &self.u_z, &self.b_z, h).into_iter().map(sigmoid).collect();
        let r: Vec<f64> = gate(&self.w_r, &self.u_r, &self.b_r, h).into_iter().map(sigmoid).collect();
        let rh: Vec<f64> = r.iter().zip(h).map(|(r, h)| r * h).collect();
        let cand: Vec<f64> = gate(&self.w_h, &self.u_h, &self.b_h, &rh).into_iter().map(f64::tanh).collect();
        let next: Vec<f64> = (0..h.len()).map(|i| (1.0 - z[i]) * h[i] + z[i] * cand[i]).collect();
        Ok((GruState { hidden: next }, GruCache { x: x.to_vec(), h: h.clone(), z, r, rh, cand }))
    }

    /// Backpropagates `dh_next` through one step, accumulating parameter
    /// gradients into `grad`. Returns `(dL/dx, dL/dh)`.
    pub fn backward(&self, cache: &GruCache, dh_next: &[f64], grad: &mut Gru) -> (Vec<f64>, Vec<f64>) {
        let n = self.hidden();
        let GruCache { x, h, z, r, rh, cand } = cache;
        let mut dh: Vec<f64> = (0..n).map(|i| dh_next[i] * (1.0 - z[i])).collect();
        let da_h: Vec<f64> = (0..n).map(|i| dh_next[i] * z[i] * (1.0 - cand[i] * cand[i])).collect();
        let da_z: Vec<f64> = (0..n).map(|i| dh_next[i] * (cand[i] - h[i]) * z[i] * (1.0 - z[i])).collect();

        grad.w_h.add_outer(&da_h, x);
        grad.u_h.add_outer(&da_h, rh);
        add_into(&mut grad.b_h, &da_h);
        let mut dx = self.w_h.matvec_t(&da_h);
        let drh = self.u_h.matvec_t(&da_h);
        let da_r: Vec<f64> = (0..n).map(|i| drh[i] * h[i] * r[i] * (1.0 - r[i])).collect();
        for i in 0..n {
            dh[i] += drh[i] * r[i];
        }

        for (w, u, gw, gu, gb, da) in [
            (&self.w_r, &self.u_r, &mut grad.w_r, &mut grad.u_r, &mut grad.b_r, &da_r),
            (&self.w_z, &self.u_z, &mut grad.w_z, &mut grad.u_z, &mut grad.b_z, &da_z),
        ] {
            gw.add_outer(da, x);
            gu.add_outer(da, h);
            add_into(gb, da);
            add_into(&mut dx, &w.matvec_t(da));
            add_into(&mut dh, &u.matvec_t(da));
        }
        (dx, dh)
    }
}

fn add_into(acc: &mut [f64], v: &[f64]) {
    for (a, b) in acc.iter_mut().zip(v) {
        *a += b;
    }
}

fn mat<'a>(name: &str, t: &'a Tensor2) -> (String, [usize; 2], &'a [f64]) {
    (format!("gru.{name}"), [t.rows, t.cols], &t.data)
}

fn vec_<'a>(name: &str, b: &'a [f64]) -> (String, [usize; 2], &'a [f64]) {
    (format!("gru.{name}"), [b.len(), 1], b)
}

impl Parameters for Gru {
    fn named(&self) -> Vec<(String, [usize; 2], &[f64])> {
        vec![
            mat("w_z", &self.w_z),
            mat("u_z", &self.u_z),
            vec_("b_z", &self.b_z),
            mat("w_r", &self.w_r),
            mat("u_r", &self.u_r),
            vec_("b_r", &self.b_r),
            mat("w_h", &self.w_h),
            mat("u_h", &self.u_h),
            vec_("b_h", &self.b_h),
        ]
    }

    fn arrays_mut(&mut self) -> Vec<&mut [f64]> {
        vec![
            &mut self.w_z.data,
            &mut self.u_z.data,
            &mut self.b_z,
            &mut self.w_r.data,
            &mut self.u_r.data,
            &mut self.b_r,
            &mut self.w_h.data,
            &mut self.u_h.data,
            &mut self.b_h,
        ]
    }
}
