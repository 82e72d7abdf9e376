//! Dense statevector simulation of the restricted gate set.
//!
//! Qubit `q` is bit `q` of the basis index (qubit 0 is the least significant
//! bit). Rotations follow `R^a(theta) = exp(-i sigma^a theta)` with no
//! half-angle factor, so `Rx(pi/2)|0> = -i|1>`.

use num_complex::Complex64;

use crate::circuit::{Circuit, GateKind, GateOp, MAX_QUBITS};
use crate::error::{config, usage, Result};
use crate::hamiltonian::PauliHamiltonian;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    n_qubits: usize,
    amps: Vec<Complex64>,
}

impl StateVector {
    /// `|0...0>` on `n` qubits, `1 <= n <= 16`.
    pub fn new_zero(n: usize) -> Result<Self> {
        if n == 0 || n > MAX_QUBITS {
            return config(format!("statevector width must be in 1..={MAX_QUBITS}, got {n}"));
        }
        let mut amps = vec![ZERO; 1 << n];
        amps[0] = ONE;
        Ok(StateVector { n_qubits: n, amps })
    }

    /// Wraps raw amplitudes; the length must be `2^n`. No normalization is applied.
    pub fn from_amplitudes(n: usize, amps: Vec<Complex64>) -> Result<Self> {
        if n == 0 || n > MAX_QUBITS {
            return config(format!("statevector width must be in 1..={MAX_QUBITS}, got {n}"));
        }
        if amps.len() != 1 << n {
            return usage(format!("expected {} amplitudes, got {}", 1usize << n, amps.len()));
        }
        Ok(StateVector { n_qubits: n, amps })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    pub fn norm(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
    }

    fn check_qubit(&self, q: usize) -> Result<()> {
        if q >= self.n_qubits {
            return usage(format!("qubit {q} out of range for {} qubits", self.n_qubits));
        }
        Ok(())
    }

    /// Applies the 2x2 matrix `[[a, b], [c, d]]` to qubit `q`.
    fn apply_1q(&mut self, q: usize, m: [Complex64; 4]) {
        let stride = 1usize << q;
        let [a, b, c, d] = m;
        for block in self.amps.chunks_exact_mut(stride << 1) {
            let (lo, hi) = block.split_at_mut(stride);
            for (x, y) in lo.iter_mut().zip(hi.iter_mut()) {
                let (u, v) = (*x, *y);
                *x = a * u + b * v;
                *y = c * u + d * v;
            }
        }
    }

    fn apply_cnot(&mut self, control: usize, target: usize) {
        let cm = 1usize << control;
        let tm = 1usize << target;
        for i in 0..self.amps.len() {
            if i & cm != 0 && i & tm == 0 {
                self.amps.swap(i, i | tm);
            }
        }
    }

    /// Applies one gate in place. `theta` is ignored for non-rotations.
    pub fn apply_gate(&mut self, gate: &GateOp, theta: f64) -> Result<()> {
        self.check_qubit(gate.target)?;
        let q = gate.target;
        match gate.kind {
            GateKind::Cnot => {
                let Some(c) = gate.control else { return usage("CNOT without control") };
                self.check_qubit(c)?;
                if c == q {
                    return usage("CNOT control equals target");
                }
                self.apply_cnot(c, q);
            }
            kind => {
                if gate.control.is_some() {
                    return usage("single-qubit gate with a control");
                }
                self.apply_1q(q, single_qubit_matrix(kind, theta));
            }
        }
        Ok(())
    }

    /// Applies every gate of `circuit` in order with group values from `params`.
    pub fn apply_circuit(&mut self, circuit: &Circuit, params: &[f64]) -> Result<()> {
        self.apply_circuit_shifted(circuit, params, None)
    }

    /// Like [`apply_circuit`](Self::apply_circuit), but gate `shift.0` receives
    /// its group value plus `shift.1`. Used by shift-rule gradients.
    pub fn apply_circuit_shifted(
        &mut self,
        circuit: &Circuit,
        params: &[f64],
        shift: Option<(usize, f64)>,
    ) -> Result<()> {
        if circuit.n_qubits() != self.n_qubits {
            return usage(format!(
                "circuit has {} qubits but state has {}",
                circuit.n_qubits(),
                self.n_qubits
            ));
        }
        circuit.check_params(params)?;
        for (i, g) in circuit.gates().iter().enumerate() {
            let mut theta = g.param_slot.map_or(0.0, |s| params[s]);
            if let Some((j, delta)) = shift {
                if j == i {
                    theta += delta;
                }
            }
            self.apply_gate(g, theta)?;
        }
        Ok(())
    }

    /// `<psi|H|psi>`. Compiles `ham` on the fly; hot loops should hold a
    /// [`CompiledHamiltonian`](crate::hamiltonian::CompiledHamiltonian) instead.
    pub fn expectation(&self, ham: &PauliHamiltonian) -> Result<f64> {
        if ham.n_qubits() != self.n_qubits {
            return usage(format!(
                "state has {} qubits but Hamiltonian has {}",
                self.n_qubits,
                ham.n_qubits()
            ));
        }
        ham.compile().expectation(self)
    }
}

/// Matrix of a single-qubit gate under the `exp(-i sigma theta)` convention.
pub fn single_qubit_matrix(kind: GateKind, theta: f64) -> [Complex64; 4] {
    let (s, c) = theta.sin_cos();
    let mis = Complex64::new(0.0, -s);
    match kind {
        GateKind::Rx => [Complex64::new(c, 0.0), mis, mis, Complex64::new(c, 0.0)],
        GateKind::Ry => [
            Complex64::new(c, 0.0),
            Complex64::new(-s, 0.0),
            Complex64::new(s, 0.0),
            Complex64::new(c, 0.0),
        ],
        GateKind::Rz => [Complex64::new(c, -s), ZERO, ZERO, Complex64::new(c, s)],
        GateKind::H => {
            let h = Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
            [h, h, h, -h]
        }
        GateKind::Cnot => unreachable!("CNOT is not a single-qubit gate"),
    }
}

/// Convenience: `|0..0>` evolved by `circuit`.
pub fn prepare(circuit: &Circuit, params: &[f64]) -> Result<StateVector> {
    let mut psi = StateVector::new_zero(circuit.n_qubits())?;
    psi.apply_circuit(circuit, params)?;
    Ok(psi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_PI_2;

    fn close(a: Complex64, b: Complex64) -> bool {
        (a - b).norm() < 1e-12
    }

    #[test]
    fn zero_state() {
        let s = StateVector::new_zero(1).unwrap();
        assert_eq!(s.amplitudes(), &[ONE, ZERO]);
        let s = StateVector::new_zero(2).unwrap();
        assert_eq!(s.amplitudes(), &[ONE, ZERO, ZERO, ZERO]);
        assert!((StateVector::new_zero(3).unwrap().norm() - 1.0).abs() < 1e-15);
        assert!(StateVector::new_zero(0).is_err());
        assert!(StateVector::new_zero(17).is_err());
    }

    #[test]
    fn rx_half_pi_flips_with_phase() {
        let mut s = StateVector::new_zero(1).unwrap();
        s.apply_gate(&GateOp::rx(0), FRAC_PI_2).unwrap();
        assert!(close(s.amplitudes()[0], ZERO));
        assert!(close(s.amplitudes()[1], Complex64::new(0.0, -1.0)));
    }

    #[test]
    fn cnot_truth_table() {
        // |10> with qubit 0 = 1 is basis index 1.
        let mut amps = vec![ZERO; 4];
        amps[1] = ONE;
        let mut s = StateVector::from_amplitudes(2, amps).unwrap();
        s.apply_gate(&GateOp::cnot(0, 1), 0.0).unwrap();
        assert!(close(s.amplitudes()[3], ONE));
    }

    #[test]
    fn ry_inverse() {
        let amps: Vec<Complex64> = (0..8).map(|i| Complex64::new(i as f64 * 0.1, 0.3 - i as f64 * 0.05)).collect();
        let n = amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        let amps: Vec<Complex64> = amps.iter().map(|a| a / n).collect();
        let mut s = StateVector::from_amplitudes(3, amps.clone()).unwrap();
        s.apply_gate(&GateOp::ry(1), 0.77).unwrap();
        s.apply_gate(&GateOp::ry(1), -0.77).unwrap();
        for (a, b) in s.amplitudes().iter().zip(&amps) {
            assert!(close(*a, *b));
        }
    }

    #[test]
    fn out_of_range_gate_rejected() {
        let mut s = StateVector::new_zero(2).unwrap();
        assert!(s.apply_gate(&GateOp::rx(2), 0.1).is_err());
        assert!(s.apply_gate(&GateOp::cnot(2, 0), 0.0).is_err());
        assert!(s.apply_gate(&GateOp::cnot(1, 1), 0.0).is_err());
    }

    #[test]
    fn empty_circuit_is_identity() {
        let c = Circuit::new(2).unwrap();
        let mut s = StateVector::new_zero(2).unwrap();
        s.apply_gate(&GateOp::h(0), 0.0).unwrap();
        let before = s.clone();
        s.apply_circuit(&c, &[]).unwrap();
        assert_eq!(s, before);
    }

    #[test]
    fn shared_group_binds_both_gates() {
        let mut c = Circuit::new(2).unwrap();
        let g = c.append(GateOp::rx(0), None).unwrap();
        c.append(GateOp::rx(1), g).unwrap();
        let s = prepare(&c, &[FRAC_PI_2]).unwrap();
        // (-i)^2 |11> = -|11>
        assert!(close(s.amplitudes()[3], Complex64::new(-1.0, 0.0)));
    }

    #[test]
    fn parameter_count_mismatch_rejected() {
        let mut c = Circuit::new(1).unwrap();
        c.append(GateOp::rx(0), None).unwrap();
        let mut s = StateVector::new_zero(1).unwrap();
        assert!(s.apply_circuit(&c, &[]).is_err());
        assert!(s.apply_circuit(&c, &[0.1, 0.2]).is_err());
    }

    #[test]
    fn z_expectations() {
        let mut h = PauliHamiltonian::new(1).unwrap();
        h.add_label(1.0, "Z").unwrap();
        let zero = StateVector::new_zero(1).unwrap();
        assert!((zero.expectation(&h).unwrap() - 1.0).abs() < 1e-15);
        let mut plus = zero.clone();
        plus.apply_gate(&GateOp::h(0), 0.0).unwrap();
        assert!(plus.expectation(&h).unwrap().abs() < 1e-15);
        let h2 = PauliHamiltonian::new(2).unwrap();
        assert!(zero.expectation(&h2).is_err());
    }
}
