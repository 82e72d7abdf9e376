//! Pauli-sum Hamiltonians, their compiled (bit-mask) form and spectrum bounds.
//!
//! A Pauli string is stored as an `(x_mask, z_mask)` pair: qubit `q` carries
//! `X` if only bit `q` of `x_mask` is set, `Z` if only bit `q` of `z_mask` is
//! set, and `Y` if both are. With `Y = i X Z` this gives
//!
//! ```text
//! P |x> = i^{#Y} (-1)^{popcount(x & z_mask)} |x ^ x_mask>
//! ```
//!
//! which is all the simulator and the Lanczos matvec need.

use std::collections::BTreeMap;
use std::fmt;

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::circuit::MAX_QUBITS;
use crate::error::{config, usage, QasError, Result};
use crate::rng::{stream_rng, Stream};
use crate::statevec::StateVector;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Pauli {
    I,
    X,
    Y,
    Z,
}

impl Pauli {
    fn from_bits(x: bool, z: bool) -> Pauli {
        match (x, z) {
            (false, false) => Pauli::I,
            (true, false) => Pauli::X,
            (true, true) => Pauli::Y,
            (false, true) => Pauli::Z,
        }
    }

    fn bits(self) -> (bool, bool) {
        match self {
            Pauli::I => (false, false),
            Pauli::X => (true, false),
            Pauli::Y => (true, true),
            Pauli::Z => (false, true),
        }
    }

    fn symbol(self) -> char {
        match self {
            Pauli::I => 'I',
            Pauli::X => 'X',
            Pauli::Y => 'Y',
            Pauli::Z => 'Z',
        }
    }
}

/// Tensor product of single-qubit Paulis, packed into masks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct PauliString {
    pub x_mask: u32,
    pub z_mask: u32,
}

impl PauliString {
    pub const IDENTITY: PauliString = PauliString { x_mask: 0, z_mask: 0 };

    pub fn single(qubit: usize, p: Pauli) -> Self {
        let (x, z) = p.bits();
        PauliString { x_mask: (x as u32) << qubit, z_mask: (z as u32) << qubit }
    }

    /// Builds from `(qubit, Pauli)` pairs; later entries on the same qubit win.
    pub fn from_ops(ops: &[(usize, Pauli)]) -> Self {
        let mut s = PauliString::IDENTITY;
        for &(q, p) in ops {
            let (x, z) = p.bits();
            s.x_mask = (s.x_mask & !(1 << q)) | ((x as u32) << q);
            s.z_mask = (s.z_mask & !(1 << q)) | ((z as u32) << q);
        }
        s
    }

    /// Parses `"XZIY"`, where character `q` acts on qubit `q`.
    pub fn parse(s: &str) -> Result<Self> {
        let mut out = PauliString::IDENTITY;
        for (q, c) in s.chars().enumerate() {
            let p = match c {
                'I' => Pauli::I,
                'X' => Pauli::X,
                'Y' => Pauli::Y,
                'Z' => Pauli::Z,
                _ => return Err(QasError::Parse(format!("bad Pauli symbol `{c}`"))),
            };
            let (x, z) = p.bits();
            out.x_mask |= (x as u32) << q;
            out.z_mask |= (z as u32) << q;
        }
        Ok(out)
    }

    pub fn get(&self, qubit: usize) -> Pauli {
        Pauli::from_bits(self.x_mask >> qubit & 1 == 1, self.z_mask >> qubit & 1 == 1)
    }

    pub fn n_y(&self) -> u32 {
        (self.x_mask & self.z_mask).count_ones()
    }

    pub fn is_diagonal(&self) -> bool {
        self.x_mask == 0
    }

    pub fn support(&self) -> u32 {
        self.x_mask | self.z_mask
    }

    /// `self * other = i^k * result`; returns `(k mod 4, result)`.
    pub fn mul(&self, other: &PauliString) -> (u32, PauliString) {
        let x3 = self.x_mask ^ other.x_mask;
        let z3 = self.z_mask ^ other.z_mask;
        let k = (self.x_mask & self.z_mask).count_ones() as i64
            + (other.x_mask & other.z_mask).count_ones() as i64
            - (x3 & z3).count_ones() as i64
            + 2 * (self.z_mask & other.x_mask).count_ones() as i64;
        (k.rem_euclid(4) as u32, PauliString { x_mask: x3, z_mask: z3 })
    }

    pub fn to_label(&self, n_qubits: usize) -> String {
        (0..n_qubits).map(|q| self.get(q).symbol()).collect()
    }
}

fn i_pow(k: u32) -> Complex64 {
    match k % 4 {
        0 => Complex64::new(1.0, 0.0),
        1 => Complex64::new(0.0, 1.0),
        2 => Complex64::new(-1.0, 0.0),
        _ => Complex64::new(0.0, -1.0),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PauliTerm {
    pub coeff: f64,
    pub string: PauliString,
}

/// Real-weighted sum of Pauli strings over `n_qubits`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PauliHamiltonian {
    n_qubits: usize,
    terms: Vec<PauliTerm>,
}

impl PauliHamiltonian {
    pub fn new(n_qubits: usize) -> Result<Self> {
        if n_qubits == 0 || n_qubits > MAX_QUBITS {
            return config(format!("Hamiltonian width must be in 1..={MAX_QUBITS}, got {n_qubits}"));
        }
        Ok(PauliHamiltonian { n_qubits, terms: Vec::new() })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn terms(&self) -> &[PauliTerm] {
        &self.terms
    }

    pub fn add_term(&mut self, coeff: f64, string: PauliString) -> Result<()> {
        if string.support() >> self.n_qubits != 0 {
            return usage(format!("Pauli string acts outside {} qubits", self.n_qubits));
        }
        if !coeff.is_finite() {
            return usage("non-finite Pauli coefficient");
        }
        self.terms.push(PauliTerm { coeff, string });
        Ok(())
    }

    pub fn add_label(&mut self, coeff: f64, label: &str) -> Result<()> {
        if label.chars().count() != self.n_qubits {
            return usage(format!("label `{label}` does not have {} symbols", self.n_qubits));
        }
        self.add_term(coeff, PauliString::parse(label)?)
    }

    /// Merges like terms and drops coefficients below `1e-14` in magnitude.
    pub fn simplified(&self) -> Self {
        let mut acc: BTreeMap<PauliString, f64> = BTreeMap::new();
        for t in &self.terms {
            *acc.entry(t.string).or_insert(0.0) += t.coeff;
        }
        let terms = acc
            .into_iter()
            .filter(|(_, c)| c.abs() > 1e-14)
            .map(|(string, coeff)| PauliTerm { coeff, string })
            .collect();
        PauliHamiltonian { n_qubits: self.n_qubits, terms }
    }

    pub fn is_diagonal(&self) -> bool {
        self.terms.iter().all(|t| t.string.is_diagonal())
    }

    /// `a * H + b * I`.
    pub fn affine(&self, a: f64, b: f64) -> Self {
        let mut out = self.clone();
        for t in &mut out.terms {
            t.coeff *= a;
        }
        out.terms.push(PauliTerm { coeff: b, string: PauliString::IDENTITY });
        out
    }

    /// Diagonal of `H` in the computational basis.
    pub fn diagonal(&self) -> Vec<f64> {
        let dim = 1usize << self.n_qubits;
        let mut d = vec![0.0; dim];
        for t in self.terms.iter().filter(|t| t.string.is_diagonal()) {
            let z = t.string.z_mask;
            for (x, v) in d.iter_mut().enumerate() {
                if (x as u32 & z).count_ones() % 2 == 0 {
                    *v += t.coeff;
                } else {
                    *v -= t.coeff;
                }
            }
        }
        d
    }

    /// Dense `2^n x 2^n` matrix. Intended for small `n`.
    pub fn to_dense(&self) -> DMatrix<Complex64> {
        let dim = 1usize << self.n_qubits;
        let mut m = DMatrix::from_element(dim, dim, Complex64::new(0.0, 0.0));
        for t in &self.terms {
            let ph = i_pow(t.string.n_y()) * t.coeff;
            for x in 0..dim {
                let sign = if (x as u32 & t.string.z_mask).count_ones() % 2 == 0 { 1.0 } else { -1.0 };
                let y = x ^ t.string.x_mask as usize;
                m[(y, x)] += ph * sign;
            }
        }
        m
    }

    pub fn compile(&self) -> CompiledHamiltonian {
        CompiledHamiltonian::new(self)
    }

    /// Exact `(lambda_min, lambda_max)`.
    ///
    /// Diagonal Hamiltonians are scanned directly; otherwise dense
    /// diagonalization is used up to 10 qubits and a matrix-free Lanczos
    /// iteration beyond that.
    pub fn extreme_eigenvalues(&self) -> Result<SpectrumBounds> {
        if self.is_diagonal() {
            let d = self.diagonal();
            let lo = d.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = d.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            return Ok(SpectrumBounds { lambda_min: lo, lambda_max: hi });
        }
        if self.n_qubits <= DENSE_LIMIT {
            return Ok(dense_bounds(self));
        }
        lanczos_bounds(&self.compile(), LanczosOptions::default())
    }
}

impl fmt::Display for PauliHamiltonian {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for t in &self.terms {
            writeln!(f, "{:+.12} {}", t.coeff, t.string.to_label(self.n_qubits))?;
        }
        Ok(())
    }
}

/// Complex-weighted Pauli sum, used while expanding operator products such as
/// `sigma^+ sigma^-` before they are reduced to a real Hamiltonian.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PauliSum {
    terms: BTreeMap<PauliString, Complex64>,
}

impl PauliSum {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn identity(c: f64) -> Self {
        Self::term(Complex64::new(c, 0.0), PauliString::IDENTITY)
    }

    pub fn term(c: Complex64, s: PauliString) -> Self {
        let mut out = Self::zero();
        out.add_term(c, s);
        out
    }

    pub fn single(qubit: usize, p: Pauli, c: f64) -> Self {
        Self::term(Complex64::new(c, 0.0), PauliString::single(qubit, p))
    }

    pub fn add_term(&mut self, c: Complex64, s: PauliString) {
        *self.terms.entry(s).or_insert(Complex64::new(0.0, 0.0)) += c;
    }

    pub fn add(&self, other: &PauliSum) -> PauliSum {
        let mut out = self.clone();
        for (s, c) in &other.terms {
            out.add_term(*c, *s);
        }
        out
    }

    pub fn scale(&self, a: Complex64) -> PauliSum {
        PauliSum { terms: self.terms.iter().map(|(s, c)| (*s, c * a)).collect() }
    }

    pub fn mul(&self, other: &PauliSum) -> PauliSum {
        let mut out = PauliSum::zero();
        for (s1, c1) in &self.terms {
            for (s2, c2) in &other.terms {
                let (k, s3) = s1.mul(s2);
                out.add_term(c1 * c2 * i_pow(k), s3);
            }
        }
        out
    }

    /// Hermitian adjoint: Pauli strings are Hermitian, so only coefficients conjugate.
    pub fn adjoint(&self) -> PauliSum {
        PauliSum { terms: self.terms.iter().map(|(s, c)| (*s, c.conj())).collect() }
    }

    pub fn iter(&self) -> impl Iterator<Item = (&PauliString, &Complex64)> {
        self.terms.iter()
    }

    /// Largest imaginary part among merged coefficients.
    pub fn max_imag(&self) -> f64 {
        self.terms.values().map(|c| c.im.abs()).fold(0.0, f64::max)
    }

    /// Converts to a real Hamiltonian, rejecting imaginary residue above `tol`.
    pub fn into_hamiltonian(self, n_qubits: usize, tol: f64) -> Result<PauliHamiltonian> {
        let imag = self.max_imag();
        if imag > tol {
            return Err(QasError::Domain(format!("operator is not Hermitian: imaginary residue {imag:e}")));
        }
        let mut h = PauliHamiltonian::new(n_qubits)?;
        for (s, c) in self.terms {
            if c.re.abs() > 1e-14 {
                h.add_term(c.re, s)?;
            }
        }
        Ok(h)
    }
}

/// Extremal energies of a Hamiltonian.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectrumBounds {
    pub lambda_min: f64,
    pub lambda_max: f64,
}

const DENSE_LIMIT: usize = 10;

fn dense_bounds(h: &PauliHamiltonian) -> SpectrumBounds {
    let m = h.to_dense();
    let real = m.iter().all(|c| c.im.abs() < 1e-15);
    let ev: Vec<f64> = if real {
        SymmetricEigen::new(m.map(|c| c.re)).eigenvalues.iter().copied().collect()
    } else {
        SymmetricEigen::new(m).eigenvalues.iter().copied().collect()
    };
    SpectrumBounds {
        lambda_min: ev.iter().copied().fold(f64::INFINITY, f64::min),
        lambda_max: ev.iter().copied().fold(f64::NEG_INFINITY, f64::max),
    }
}

/// Pauli terms regrouped by `x_mask`, with per-basis-state weights precomputed.
///
/// For each group `g` with flip mask `f_g`, `H|x> = sum_g w_g[x] |x ^ f_g>`.
/// The diagonal group (`f = 0`) is stored as real values.
#[derive(Debug, Clone)]
pub struct CompiledHamiltonian {
    n_qubits: usize,
    diag: Vec<f64>,
    offdiag: Vec<(usize, Vec<Complex64>)>,
}

impl CompiledHamiltonian {
    fn new(h: &PauliHamiltonian) -> Self {
        let dim = 1usize << h.n_qubits;
        let diag = h.diagonal();
        let mut by_flip: BTreeMap<u32, Vec<PauliTerm>> = BTreeMap::new();
        for t in h.terms.iter().filter(|t| !t.string.is_diagonal()) {
            by_flip.entry(t.string.x_mask).or_default().push(*t);
        }
        let offdiag = by_flip
            .into_iter()
            .map(|(flip, terms)| {
                let mut w = vec![Complex64::new(0.0, 0.0); dim];
                for t in terms {
                    let ph = i_pow(t.string.n_y()) * t.coeff;
                    for (x, wx) in w.iter_mut().enumerate() {
                        if (x as u32 & t.string.z_mask).count_ones() % 2 == 0 {
                            *wx += ph;
                        } else {
                            *wx -= ph;
                        }
                    }
                }
                (flip as usize, w)
            })
            .collect();
        CompiledHamiltonian { n_qubits: h.n_qubits, diag, offdiag }
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn dim(&self) -> usize {
        self.diag.len()
    }

    pub fn is_diagonal(&self) -> bool {
        self.offdiag.is_empty()
    }

    /// `<psi|H|psi>` as a complex number (imaginary part is round-off).
    pub fn expectation_complex(&self, amps: &[Complex64]) -> Complex64 {
        let mut acc = Complex64::new(
            amps.iter().zip(&self.diag).map(|(a, d)| a.norm_sqr() * d).sum::<f64>(),
            0.0,
        );
        for (flip, w) in &self.offdiag {
            let mut s = Complex64::new(0.0, 0.0);
            for (x, (a, wx)) in amps.iter().zip(w).enumerate() {
                s += amps[x ^ flip].conj() * wx * a;
            }
            acc += s;
        }
        acc
    }

    /// `out = H v`.
    pub fn matvec(&self, v: &[Complex64], out: &mut [Complex64]) {
        for ((o, a), d) in out.iter_mut().zip(v).zip(&self.diag) {
            *o = a * d;
        }
        for (flip, w) in &self.offdiag {
            for (x, (a, wx)) in v.iter().zip(w).enumerate() {
                out[x ^ flip] += wx * a;
            }
        }
    }

    /// Expectation value; errors on width mismatch or non-negligible
    /// imaginary residue (which would indicate a non-Hermitian operator).
    pub fn expectation(&self, psi: &StateVector) -> Result<f64> {
        if psi.n_qubits() != self.n_qubits {
            return usage(format!(
                "state has {} qubits but Hamiltonian has {}",
                psi.n_qubits(),
                self.n_qubits
            ));
        }
        let e = self.expectation_complex(psi.amplitudes());
        if e.im.abs() > 1e-10 {
            return Err(QasError::Numerical {
                message: "expectation has imaginary part".into(),
                residual: e.im.abs(),
            });
        }
        Ok(e.re)
    }
}

/// Tuning for the matrix-free Lanczos iteration.
#[derive(Debug, Clone, Copy)]
pub struct LanczosOptions {
    pub max_iter: usize,
    pub tol: f64,
    pub seed: u64,
}

impl Default for LanczosOptions {
    fn default() -> Self {
        LanczosOptions { max_iter: 400, tol: 1e-10, seed: 0x1a2b_3c4d }
    }
}

fn dot(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

fn norm(a: &[Complex64]) -> f64 {
    a.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}

/// Lanczos with full reorthogonalization; both ends of the spectrum are read
/// off the same Krylov basis. Convergence is declared when the residual
/// `|beta_k * s_k|` of both extremal Ritz pairs is below `opts.tol` times the
/// spectral scale.
pub fn lanczos_bounds(h: &CompiledHamiltonian, opts: LanczosOptions) -> Result<SpectrumBounds> {
    let dim = h.dim();
    let mut rng = stream_rng(opts.seed, Stream::Baseline, &[dim as u64]);
    let mut v: Vec<Complex64> = (0..dim).map(|_| Complex64::new(rng.random::<f64>() - 0.5, 0.0)).collect();
    let n0 = norm(&v);
    v.iter_mut().for_each(|x| *x /= n0);

    let mut basis: Vec<Vec<Complex64>> = vec![v];
    let mut alphas: Vec<f64> = Vec::new();
    let mut betas: Vec<f64> = Vec::new();
    let mut w = vec![Complex64::new(0.0, 0.0); dim];
    let max_iter = opts.max_iter.min(dim);
    let mut last_residual = f64::INFINITY;

    for k in 0..max_iter {
        h.matvec(&basis[k], &mut w);
        let alpha = dot(&basis[k], &w).re;
        alphas.push(alpha);
        // Full reorthogonalization (twice is enough).
        for _ in 0..2 {
            for b in &basis {
                let c = dot(b, &w);
                w.iter_mut().zip(b).for_each(|(x, y)| *x -= c * y);
            }
        }
        let beta = norm(&w);

        let m = alphas.len();
        let mut t = DMatrix::<f64>::zeros(m, m);
        for i in 0..m {
            t[(i, i)] = alphas[i];
            if i + 1 < m {
                t[(i, i + 1)] = betas[i];
                t[(i + 1, i)] = betas[i];
            }
        }
        let eig = SymmetricEigen::new(t);
        let (imin, imax) = extremal_indices(eig.eigenvalues.as_slice());
        let scale = eig.eigenvalues[imax].abs().max(eig.eigenvalues[imin].abs()).max(1.0);
        let res_min = (beta * eig.eigenvectors[(m - 1, imin)]).abs();
        let res_max = (beta * eig.eigenvectors[(m - 1, imax)]).abs();
        last_residual = res_min.max(res_max);
        if last_residual <= opts.tol * scale || beta < 1e-14 || m == dim {
            return Ok(SpectrumBounds { lambda_min: eig.eigenvalues[imin], lambda_max: eig.eigenvalues[imax] });
        }
        betas.push(beta);
        basis.push(w.iter().map(|x| x / beta).collect());
    }
    Err(QasError::Numerical {
        message: format!("Lanczos did not converge in {max_iter} iterations"),
        residual: last_residual,
    })
}

fn extremal_indices(ev: &[f64]) -> (usize, usize) {
    let mut lo = 0;
    let mut hi = 0;
    for (i, &e) in ev.iter().enumerate() {
        if e < ev[lo] {
            lo = i;
        }
        if e > ev[hi] {
            hi = i;
        }
    }
    (lo, hi)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pauli_products() {
        let x = PauliString::single(0, Pauli::X);
        let y = PauliString::single(0, Pauli::Y);
        let z = PauliString::single(0, Pauli::Z);
        // XY = iZ, YX = -iZ, ZX = iY, XX = I
        assert_eq!(x.mul(&y), (1, z));
        assert_eq!(y.mul(&x), (3, z));
        assert_eq!(z.mul(&x), (1, y));
        assert_eq!(x.mul(&x), (0, PauliString::IDENTITY));
    }

    #[test]
    fn label_round_trip() {
        let s = PauliString::parse("XIYZ").unwrap();
        assert_eq!(s.to_label(4), "XIYZ");
        assert_eq!(s.get(2), Pauli::Y);
    }

    #[test]
    fn single_z_bounds() {
        let mut h = PauliHamiltonian::new(1).unwrap();
        h.add_label(1.0, "Z").unwrap();
        let b = h.extreme_eigenvalues().unwrap();
        assert_eq!((b.lambda_min, b.lambda_max), (-1.0, 1.0));
    }

    #[test]
    fn term_outside_register_rejected() {
        let mut h = PauliHamiltonian::new(2).unwrap();
        assert!(h.add_term(1.0, PauliString::single(2, Pauli::Z)).is_err());
        assert!(h.add_label(1.0, "ZZZ").is_err());
    }

    #[test]
    fn non_hermitian_sum_rejected() {
        let s = PauliSum::term(Complex64::new(0.0, 1.0), PauliString::single(0, Pauli::X));
        assert!(s.into_hamiltonian(1, 1e-12).is_err());
    }

    #[test]
    fn lanczos_matches_dense_on_random_hamiltonians() {
        let mut rng = stream_rng(11, Stream::Baseline, &[]);
        for n in [3usize, 5, 7] {
            let mut h = PauliHamiltonian::new(n).unwrap();
            for _ in 0..12 {
                let label: String = (0..n).map(|_| ['I', 'X', 'Y', 'Z'][rng.random_range(0..4)]).collect();
                h.add_label(rng.random::<f64>() * 2.0 - 1.0, &label).unwrap();
            }
            let h = h.simplified();
            let dense = dense_bounds(&h);
            let lz = lanczos_bounds(&h.compile(), LanczosOptions::default()).unwrap();
            assert!((dense.lambda_min - lz.lambda_min).abs() < 1e-8, "n={n}");
            assert!((dense.lambda_max - lz.lambda_max).abs() < 1e-8, "n={n}");
        }
    }

    #[test]
    fn lanczos_budget_exhaustion_reports_residual() {
        let mut h = PauliHamiltonian::new(8).unwrap();
        for q in 0..7 {
            let mut s = vec!['I'; 8];
            s[q] = 'X';
            s[q + 1] = 'X';
            h.add_label(1.0, &s.iter().collect::<String>()).unwrap();
            s[q] = 'Z';
            s[q + 1] = 'I';
            h.add_label(0.3, &s.iter().collect::<String>()).unwrap();
        }
        let opts = LanczosOptions { max_iter: 3, ..Default::default() };
        match lanczos_bounds(&h.compile(), opts) {
            Err(QasError::Numerical { residual, .. }) => assert!(residual > 0.0),
            other => panic!("expected non-convergence, got {other:?}"),
        }
    }
}
