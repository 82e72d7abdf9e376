//! Problem Hamiltonians, the cubic-graph corpus and baseline ansätze.

mod enumerate;
mod graph;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

pub use enumerate::{canonical_code, enumerate_cubic_graphs};
pub use graph::{corpus_from_text, corpus_to_text, split_instances, Graph, InstanceSplit};

use crate::circuit::{Circuit, GateOp};
use crate::error::{config, Result};
use crate::hamiltonian::{Pauli, PauliHamiltonian, PauliString, PauliSum};

/// `H = 1/2 sum_{(i,j) in E} (Z_i Z_j - I)`; the eigenvalue of bitstring `z` is `-cut(z)`.
pub fn maxcut_hamiltonian(g: &Graph) -> Result<PauliHamiltonian> {
    let mut h = PauliHamiltonian::new(g.n_vertices().max(1))?;
    for (a, b) in g.edges() {
        h.add_term(0.5, PauliString::from_ops(&[(a, Pauli::Z), (b, Pauli::Z)]))?;
    }
    if g.n_edges() > 0 {
        h.add_term(-0.5 * g.n_edges() as f64, PauliString::IDENTITY)?;
    }
    Ok(h)
}

/// Upper limit of the outer electric-field sum.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ElectricSum {
    /// `j = 1..n`.
    #[default]
    ThroughN,
    /// `j = 1..n-1`, the usual open-chain form.
    ThroughNMinusOne,
}

/// Couplings of the lattice Schwinger Hamiltonian.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SchwingerParams {
    pub w: f64,
    pub m0: f64,
    pub g_bar: f64,
    pub eps0: f64,
    #[serde(default)]
    pub electric_sum: ElectricSum,
}

impl Default for SchwingerParams {
    fn default() -> Self {
        SchwingerParams { w: 1.0, m0: 1.0, g_bar: 1.0, eps0: 0.0, electric_sum: ElectricSum::ThroughN }
    }
}

fn alt_sign(j: usize) -> f64 {
    if j % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}

/// Spin-mapped Schwinger Hamiltonian on `n` sites (1-based site `j` is qubit `j-1`):
///
/// ```text
/// H = w sum_{j<n} [s+_j s-_{j+1} + h.c.] + m0/2 sum_j (-1)^j Z_j + g sum_j L_j^2
/// L_j = eps0 - 1/2 sum_{l<=j} (Z_l + (-1)^l)
/// ```
///
/// Operator products are expanded literally and like terms merged.
pub fn schwinger_hamiltonian(n: usize, p: &SchwingerParams) -> Result<PauliHamiltonian> {
    if n < 2 || n % 2 != 0 {
        return config(format!("Schwinger model needs an even number of sites >= 2, got {n}"));
    }
    let half = Complex64::new(0.5, 0.0);
    let sigma = |q: usize, sign: f64| {
        PauliSum::single(q, Pauli::X, 0.5).add(&PauliSum::term(
            Complex64::new(0.0, 0.5 * sign),
            PauliString::single(q, Pauli::Y),
        ))
    };
    let mut h = PauliSum::zero();
    for q in 0..n - 1 {
        let hop = sigma(q, 1.0).mul(&sigma(q + 1, -1.0));
        h = h.add(&hop.add(&hop.adjoint()).scale(Complex64::new(p.w, 0.0)));
    }
    for j in 1..=n {
        h = h.add(&PauliSum::single(j - 1, Pauli::Z, 0.5 * p.m0 * alt_sign(j)));
    }
    let last = match p.electric_sum {
        ElectricSum::ThroughN => n,
        ElectricSum::ThroughNMinusOne => n - 1,
    };
    let mut field = PauliSum::identity(p.eps0);
    for j in 1..=last {
        let charge = PauliSum::single(j - 1, Pauli::Z, 1.0).add(&PauliSum::identity(alt_sign(j)));
        field = field.add(&charge.scale(-half));
        h = h.add(&field.mul(&field).scale(Complex64::new(p.g_bar, 0.0)));
    }
    Ok(h.into_hamiltonian(n, 1e-12)?.simplified())
}

/// QAOA ansatz for Max-Cut on `g` at depth `p`.
///
/// Layout: Hadamards on every qubit, then `p` layers of a cost block (every
/// edge `(u, v)` as `CNOT(u,v) RZ(v) CNOT(u,v)`, all sharing one parameter)
/// and a mixer block (`RX` on every qubit, one shared parameter). With the
/// `exp(-i sigma theta)` convention the cost block equals `exp(-i theta sum Z_u Z_v)`.
pub fn qaoa_circuit(g: &Graph, p: usize) -> Result<Circuit> {
    if p == 0 {
        return config("QAOA depth must be at least 1");
    }
    let n = g.n_vertices();
    let mut c = Circuit::new(n)?;
    for q in 0..n {
        c.append(GateOp::h(q), None)?;
    }
    for _ in 0..p {
        let mut gamma = None;
        for (a, b) in g.edges() {
            c.append(GateOp::cnot(a, b), None)?;
            gamma = c.append(GateOp::rz(b), gamma)?;
            c.append(GateOp::cnot(a, b), None)?;
        }
        let mut beta = None;
        for q in 0..n {
            beta = c.append(GateOp::rx(q), beta)?;
        }
        c.mark_step();
    }
    Ok(c)
}

/// Hardware-efficient ansatz: `layers` repetitions of `RX RY RZ` on every
/// qubit (independent parameters) followed by a closed CNOT ring
/// `CNOT(0,1) ... CNOT(n-2,n-1) CNOT(n-1,0)`.
pub fn hea_circuit(n: usize, layers: usize) -> Result<Circuit> {
    if layers == 0 {
        return config("HEA needs at least one layer");
    }
    if n < 2 {
        return config(format!("HEA needs at least 2 qubits, got {n}"));
    }
    let mut c = Circuit::new(n)?;
    for _ in 0..layers {
        for q in 0..n {
            c.append(GateOp::rx(q), None)?;
            c.append(GateOp::ry(q), None)?;
            c.append(GateOp::rz(q), None)?;
        }
        for q in 0..n {
            c.append(GateOp::cnot(q, (q + 1) % n), None)?;
        }
        c.mark_step();
    }
    Ok(c)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::statevec::prepare;

    #[test]
    fn maxcut_k4_structure() {
        let h = maxcut_hamiltonian(&Graph::complete(4)).unwrap();
        assert!(h.is_diagonal());
        let zz = h.terms().iter().filter(|t| t.string.z_mask.count_ones() == 2).count();
        assert_eq!(zz, 6);
        let consts: Vec<f64> = h.terms().iter().filter(|t| t.string == PauliString::IDENTITY).map(|t| t.coeff).collect();
        assert_eq!(consts, vec![-3.0]);
    }

    #[test]
    fn maxcut_single_edge() {
        let h = maxcut_hamiltonian(&Graph::new(2, [(0, 1)]).unwrap()).unwrap();
        assert_eq!(h.diagonal(), vec![0.0, -1.0, -1.0, 0.0]);
    }

    #[test]
    fn maxcut_empty_graph() {
        let h = maxcut_hamiltonian(&Graph::new(3, []).unwrap()).unwrap();
        assert!(h.diagonal().iter().all(|&d| d == 0.0));
        let b = h.extreme_eigenvalues().unwrap();
        assert_eq!((b.lambda_min, b.lambda_max), (0.0, 0.0));
    }

    #[test]
    fn maxcut_k4_bounds() {
        let b = maxcut_hamiltonian(&Graph::complete(4)).unwrap().extreme_eigenvalues().unwrap();
        assert_eq!((b.lambda_min, b.lambda_max), (-4.0, 0.0));
    }

    #[test]
    fn schwinger_rejects_odd() {
        assert!(schwinger_hamiltonian(3, &SchwingerParams::default()).is_err());
        assert!(schwinger_hamiltonian(0, &SchwingerParams::default()).is_err());
    }

    #[test]
    fn schwinger_open_chain_differs_by_total_charge_term() {
        let full = schwinger_hamiltonian(4, &SchwingerParams::default()).unwrap();
        let open = schwinger_hamiltonian(
            4,
            &SchwingerParams { electric_sum: ElectricSum::ThroughNMinusOne, ..Default::default() },
        )
        .unwrap();
        // The j = n term is (1/2 sum Z)^2 at eps0 = 0; it vanishes on |0101>.
        let d_full = full.diagonal();
        let d_open = open.diagonal();
        assert!((d_full[0b1010] - d_open[0b1010]).abs() < 1e-12);
        assert!((d_full[0] - d_open[0] - 4.0).abs() < 1e-12);
    }

    #[test]
    fn qaoa_counts() {
        let c = qaoa_circuit(&Graph::complete(4), 2).unwrap();
        assert_eq!((c.cnot_count(), c.param_count()), (24, 4));
        let c = qaoa_circuit(&Graph::new(2, [(0, 1)]).unwrap(), 1).unwrap();
        assert_eq!((c.cnot_count(), c.param_count()), (2, 2));
        assert!(qaoa_circuit(&Graph::complete(4), 0).is_err());
    }

    #[test]
    fn qaoa_zero_params_gives_plus_state() {
        let c = qaoa_circuit(&Graph::complete(4), 2).unwrap();
        let s = prepare(&c, &[0.0; 4]).unwrap();
        for a in s.amplitudes() {
            assert!((a.re - 0.25).abs() < 1e-12 && a.im.abs() < 1e-12);
        }
    }

    #[test]
    fn hea_counts_and_zero_params() {
        for (n, l, np, nc) in [(4, 3, 36, 12), (6, 5, 90, 30), (8, 6, 144, 48), (12, 10, 360, 120)] {
            let c = hea_circuit(n, l).unwrap();
            assert_eq!((c.param_count(), c.cnot_count()), (np, nc), "n={n} L={l}");
        }
        let c = hea_circuit(4, 3).unwrap();
        let s = prepare(&c, &vec![0.0; 36]).unwrap();
        assert!((s.amplitudes()[0].re - 1.0).abs() < 1e-12);
        assert!(hea_circuit(4, 0).is_err());
    }
}
