//! Small dense layers with hand-written backward passes, a GRU cell and ADAM.
//!
//! Gradients are accumulated into a second instance of the same layer type
//! (`grad`), so a model and its gradient share one parameter layout.

mod gru;

use std::collections::BTreeMap;
use std::path::Path;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{usage, QasError, Result};
use crate::rng::Rng;

pub use gru::{Gru, GruCache, GruState};

/// Row-major matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tensor2 {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Tensor2 {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Tensor2 { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return usage(format!("{rows}x{cols} tensor needs {} values, got {}", rows * cols, data.len()));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return usage("tensor contains non-finite values");
        }
        Ok(Tensor2 { rows, cols, data })
    }

    pub fn identity(n: usize) -> Self {
        let mut t = Tensor2::zeros(n, n);
        for i in 0..n {
            t.data[i * n + i] = 1.0;
        }
        t
    }

    /// Uniform in `[-1/sqrt(cols), 1/sqrt(cols)]`; `cols` is the fan-in.
    pub fn uniform(rows: usize, cols: usize, rng: &mut Rng) -> Self {
        let bound = 1.0 / (cols.max(1) as f64).sqrt();
        Tensor2 { rows, cols, data: (0..rows * cols).map(|_| rng.random_range(-bound..=bound)).collect() }
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    /// `W x`.
    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        debug_assert_eq!(x.len(), self.cols);
        self.data.chunks_exact(self.cols).map(|row| row.iter().zip(x).map(|(w, v)| w * v).sum()).collect()
    }

    /// `W^T g`.
    pub fn matvec_t(&self, g: &[f64]) -> Vec<f64> {
        debug_assert_eq!(g.len(), self.rows);
        let mut out = vec![0.0; self.cols];
        for (row, &gi) in self.data.chunks_exact(self.cols).zip(g) {
            if gi == 0.0 {
                continue;
            }
            for (o, w) in out.iter_mut().zip(row) {
                *o += w * gi;
            }
        }
        out
    }

    /// `self += g x^T`.
    pub fn add_outer(&mut self, g: &[f64], x: &[f64]) {
        for (row, &gi) in self.data.chunks_exact_mut(self.cols).zip(g) {
            if gi == 0.0 {
                continue;
            }
            for (w, v) in row.iter_mut().zip(x) {
                *w += gi * v;
            }
        }
    }
}

/// Named views of every trainable array, in a fixed order.
pub trait Parameters {
    fn named(&self) -> Vec<(String, [usize; 2], &[f64])>;
    fn arrays_mut(&mut self) -> Vec<&mut [f64]>;

    fn zero(&mut self) {
        for a in self.arrays_mut() {
            a.fill(0.0);
        }
    }

    fn n_params(&self) -> usize {
        self.named().iter().map(|(_, _, a)| a.len()).sum()
    }

    fn flatten(&self) -> Vec<f64> {
        self.named().into_iter().flat_map(|(_, _, a)| a.iter().copied()).collect()
    }

    fn set_flat(&mut self, flat: &[f64]) {
        let mut off = 0;
        for a in self.arrays_mut() {
            a.copy_from_slice(&flat[off..off + a.len()]);
            off += a.len();
        }
        debug_assert_eq!(off, flat.len());
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Linear {
    pub w: Tensor2,
    pub b: Vec<f64>,
}

impl Linear {
    pub fn zeros(inputs: usize, outputs: usize) -> Self {
        Linear { w: Tensor2::zeros(outputs, inputs), b: vec![0.0; outputs] }
    }

    pub fn init(inputs: usize, outputs: usize, rng: &mut Rng) -> Self {
        Linear { w: Tensor2::uniform(outputs, inputs, rng), b: vec![0.0; outputs] }
    }

    pub fn inputs(&self) -> usize {
        self.w.cols
    }

    pub fn outputs(&self) -> usize {
        self.w.rows
    }

    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        linear_forward(x, &self.w, &self.b)
    }

    /// Accumulates parameter gradients into `grad` and returns `dL/dx`.
    pub fn backward(&self, x: &[f64], gy: &[f64], grad: &mut Linear) -> Vec<f64> {
        grad.w.add_outer(gy, x);
        for (gb, g) in grad.b.iter_mut().zip(gy) {
            *gb += g;
        }
        self.w.matvec_t(gy)
    }

    pub(crate) fn named_with(&self, prefix: &str) -> Vec<(String, [usize; 2], &[f64])> {
        vec![
            (format!("{prefix}.weight"), [self.w.rows, self.w.cols], &self.w.data[..]),
            (format!("{prefix}.bias"), [self.b.len(), 1], &self.b[..]),
        ]
    }

    pub(crate) fn arrays(&mut self) -> [&mut [f64]; 2] {
        [&mut self.w.data, &mut self.b]
    }
}

impl Parameters for Linear {
    fn named(&self) -> Vec<(String, [usize; 2], &[f64])> {
        self.named_with("linear")
    }

    fn arrays_mut(&mut self) -> Vec<&mut [f64]> {
        self.arrays().into()
    }
}

/// `y = W x + b`.
pub fn linear_forward(x: &[f64], w: &Tensor2, b: &[f64]) -> Result<Vec<f64>> {
    if x.len() != w.cols || b.len() != w.rows {
        return usage(format!("linear layer {}x{} got input {} and bias {}", w.rows, w.cols, x.len(), b.len()));
    }
    let mut y = w.matvec(x);
    for (yi, bi) in y.iter_mut().zip(b) {
        *yi += bi;
    }
    Ok(y)
}

/// Gradients of a linear layer: `(dW, db, dx)` for upstream `gy`.
pub fn linear_backward(x: &[f64], w: &Tensor2, gy: &[f64]) -> Result<(Tensor2, Vec<f64>, Vec<f64>)> {
    if x.len() != w.cols || gy.len() != w.rows {
        return usage(format!("linear layer {}x{} got input {} and gradient {}", w.rows, w.cols, x.len(), gy.len()));
    }
    let mut dw = Tensor2::zeros(w.rows, w.cols);
    dw.add_outer(gy, x);
    Ok((dw, gy.to_vec(), w.matvec_t(gy)))
}

pub fn relu(x: &[f64]) -> Vec<f64> {
    x.iter().map(|&v| if v > 0.0 { v } else { 0.0 }).collect()
}

/// Subgradient 0 at `x = 0`.
pub fn relu_backward(x: &[f64], gy: &[f64]) -> Vec<f64> {
    x.iter().zip(gy).map(|(&v, &g)| if v > 0.0 { g } else { 0.0 }).collect()
}

pub fn abs_act(x: &[f64]) -> Vec<f64> {
    x.iter().map(|v| v.abs()).collect()
}

/// Subgradient 0 at `x = 0`.
pub fn abs_backward(x: &[f64], gy: &[f64]) -> Vec<f64> {
    x.iter()
        .zip(gy)
        .map(|(&v, &g)| {
            if v > 0.0 {
                g
            } else if v < 0.0 {
                -g
            } else {
                0.0
            }
        })
        .collect()
}

pub(crate) fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdamState {
    pub first_moment: Vec<f64>,
    pub second_moment: Vec<f64>,
    pub step_count: u64,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamState {
    pub fn new(n_params: usize, lr: f64) -> Self {
        AdamState {
            first_moment: vec![0.0; n_params],
            second_moment: vec![0.0; n_params],
            step_count: 0,
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }

    /// One bias-corrected update of `model` using the gradients in `grad`.
    pub fn step<P: Parameters>(&mut self, model: &mut P, grad: &P) -> Result<()> {
        let g = grad.flatten();
        if g.len() != self.first_moment.len() {
            return usage(format!("optimizer holds {} moments but gradient has {}", self.first_moment.len(), g.len()));
        }
        if let Some(i) = g.iter().position(|v| !v.is_finite()) {
            return Err(QasError::Training(format!("non-finite gradient at flat index {i}")));
        }
        let mut p = model.flatten();
        adam_step(&mut p, &g, self);
        model.set_flat(&p);
        Ok(())
    }
}

/// Standard ADAM on flat arrays; shapes are the caller's responsibility.
pub fn adam_step(params: &mut [f64], grads: &[f64], st: &mut AdamState) {
    st.step_count += 1;
    let t = st.step_count as i32;
    let c1 = 1.0 - st.beta1.powi(t);
    let c2 = 1.0 - st.beta2.powi(t);
    for i in 0..params.len() {
        let g = grads[i];
        st.first_moment[i] = st.beta1 * st.first_moment[i] + (1.0 - st.beta1) * g;
        st.second_moment[i] = st.beta2 * st.second_moment[i] + (1.0 - st.beta2) * g * g;
        let m_hat = st.first_moment[i] / c1;
        let v_hat = st.second_moment[i] / c2;
        params[i] -= st.lr * m_hat / (v_hat.sqrt() + st.eps);
    }
}

/// JSON checkpoint: `{"tensors": {name: {"shape": [r, c], "data": [...]}}}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub tensors: BTreeMap<String, StoredTensor>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StoredTensor {
    pub shape: [usize; 2],
    pub data: Vec<f64>,
}

impl Checkpoint {
    pub fn capture<P: Parameters + ?Sized>(model: &P) -> Self {
        let tensors = model
            .named()
            .into_iter()
            .map(|(name, shape, data)| (name, StoredTensor { shape, data: data.to_vec() }))
            .collect();
        Checkpoint { tensors }
    }

    /// Copies stored arrays into `model`; names and shapes must match exactly.
    pub fn restore<P: Parameters>(&self, model: &mut P) -> Result<()> {
        let layout: Vec<(String, [usize; 2])> = model.named().into_iter().map(|(n, s, _)| (n, s)).collect();
        if layout.len() != self.tensors.len() {
            return usage(format!("checkpoint has {} tensors, model expects {}", self.tensors.len(), layout.len()));
        }
        let mut flat = Vec::new();
        for (name, shape) in &layout {
            let t = self.tensors.get(name).ok_or_else(|| QasError::Usage(format!("checkpoint lacks `{name}`")))?;
            if t.shape != *shape || t.data.len() != shape[0] * shape[1] {
                return usage(format!("`{name}`: checkpoint shape {:?}, model shape {:?}", t.shape, shape));
            }
            flat.extend_from_slice(&t.data);
        }
        model.set_flat(&flat);
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, serde_json::to_string(self)?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
    }
}
