//! Dense-matrix oracle shared by the integration tests.
#![allow(dead_code)]

pub use num_complex::Complex64 as C;
use qas_core::circuit::{Circuit, GateKind, GateOp};
use qas_core::hamiltonian::{Pauli, PauliHamiltonian, PauliString};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub type M = Vec<Vec<C>>;

pub fn c(re: f64, im: f64) -> C {
    C::new(re, im)
}

pub fn eye(d: usize) -> M {
    (0..d).map(|i| (0..d).map(|j| if i == j { c(1.0, 0.0) } else { c(0.0, 0.0) }).collect()).collect()
}

pub fn kron(a: &M, b: &M) -> M {
    let (ra, rb) = (a.len(), b.len());
    let mut out = vec![vec![c(0.0, 0.0); ra * rb]; ra * rb];
    for i in 0..ra {
        for j in 0..ra {
            for k in 0..rb {
                for l in 0..rb {
                    out[i * rb + k][j * rb + l] = a[i][j] * b[k][l];
                }
            }
        }
    }
    out
}

pub fn matmul(a: &M, b: &M) -> M {
    let d = a.len();
    let mut out = vec![vec![c(0.0, 0.0); d]; d];
    for i in 0..d {
        for k in 0..d {
            if a[i][k] == c(0.0, 0.0) {
                continue;
            }
            for j in 0..d {
                out[i][j] += a[i][k] * b[k][j];
            }
        }
    }
    out
}

pub fn add(a: &M, b: &M, s: C) -> M {
    a.iter().zip(b).map(|(r, q)| r.iter().zip(q).map(|(x, y)| x + s * y).collect()).collect()
}

pub fn dagger(a: &M) -> M {
    let d = a.len();
    (0..d).map(|i| (0..d).map(|j| a[j][i].conj()).collect()).collect()
}

/// Embeds a one-qubit matrix at qubit `q` (qubit 0 is the rightmost tensor factor).
pub fn embed(m: &M, q: usize, n: usize) -> M {
    let mut out = vec![vec![c(1.0, 0.0)]];
    for k in (0..n).rev() {
        out = kron(&out, if k == q { m } else { &EYE2 });
    }
    out
}

static EYE2: std::sync::LazyLock<M> = std::sync::LazyLock::new(|| eye(2));

pub fn pauli_matrix(p: Pauli) -> M {
    match p {
        Pauli::I => eye(2),
        Pauli::X => vec![vec![c(0.0, 0.0), c(1.0, 0.0)], vec![c(1.0, 0.0), c(0.0, 0.0)]],
        Pauli::Y => vec![vec![c(0.0, 0.0), c(0.0, -1.0)], vec![c(0.0, 1.0), c(0.0, 0.0)]],
        Pauli::Z => vec![vec![c(1.0, 0.0), c(0.0, 0.0)], vec![c(0.0, 0.0), c(-1.0, 0.0)]],
    }
}

/// `exp(-i theta sigma) = cos(theta) I - i sin(theta) sigma`.
pub fn rotation(p: Pauli, theta: f64) -> M {
    add(&eye(2).iter().map(|r| r.iter().map(|x| x * theta.cos()).collect()).collect(), &pauli_matrix(p), c(0.0, -theta.sin()))
}

pub fn gate_matrix(g: &GateOp, theta: f64, n: usize) -> M {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    match g.kind {
        GateKind::Rx => embed(&rotation(Pauli::X, theta), g.target, n),
        GateKind::Ry => embed(&rotation(Pauli::Y, theta), g.target, n),
        GateKind::Rz => embed(&rotation(Pauli::Z, theta), g.target, n),
        GateKind::H => embed(&vec![vec![c(h, 0.0), c(h, 0.0)], vec![c(h, 0.0), c(-h, 0.0)]], g.target, n),
        GateKind::Cnot => {
            // |0><0|_c (x) I + |1><1|_c (x) X_t
            let p0 = vec![vec![c(1.0, 0.0), c(0.0, 0.0)], vec![c(0.0, 0.0), c(0.0, 0.0)]];
            let p1 = vec![vec![c(0.0, 0.0), c(0.0, 0.0)], vec![c(0.0, 0.0), c(1.0, 0.0)]];
            let ctl = g.control.unwrap();
            add(&embed(&p0, ctl, n), &matmul(&embed(&p1, ctl, n), &embed(&pauli_matrix(Pauli::X), g.target, n)), c(1.0, 0.0))
        }
    }
}

pub fn dense_state(circ: &Circuit, params: &[f64]) -> Vec<C> {
    let n = circ.n_qubits();
    let mut u = eye(1 << n);
    for g in circ.gates() {
        let theta = g.param_slot.map_or(0.0, |s| params[s]);
        u = matmul(&gate_matrix(g, theta, n), &u);
    }
    u.iter().map(|row| row[0]).collect()
}

pub fn dense_hamiltonian(h: &PauliHamiltonian) -> M {
    let n = h.n_qubits();
    let mut out = vec![vec![c(0.0, 0.0); 1 << n]; 1 << n];
    for t in h.terms() {
        let mut m = vec![vec![c(1.0, 0.0)]];
        for q in (0..n).rev() {
            m = kron(&m, &pauli_matrix(t.string.get(q)));
        }
        out = add(&out, &m, c(t.coeff, 0.0));
    }
    out
}

pub fn expect(h: &M, psi: &[C]) -> C {
    let d = psi.len();
    let mut acc = c(0.0, 0.0);
    for i in 0..d {
        for j in 0..d {
            acc += psi[i].conj() * h[i][j] * psi[j];
        }
    }
    acc
}

pub fn random_circuit(rng: &mut ChaCha8Rng, n: usize, len: usize) -> Circuit {
    let mut circ = Circuit::new(n).unwrap();
    let mut last_group = None;
    for _ in 0..len {
        let q = rng.random_range(0..n);
        let op = match rng.random_range(0..5) {
            0 => GateOp::rx(q),
            1 => GateOp::ry(q),
            2 => GateOp::rz(q),
            3 => GateOp::h(q),
            _ if n > 1 => GateOp::cnot(q, (q + 1 + rng.random_range(0..n - 1)) % n),
            _ => GateOp::h(q),
        };
        let share = if op.kind.is_rotation() && last_group.is_some() && rng.random_bool(0.3) { last_group } else { None };
        if let Some(gid) = circ.append(op, share).unwrap() {
            last_group = Some(gid);
        }
    }
    circ
}

pub fn random_hamiltonian(rng: &mut ChaCha8Rng, n: usize, terms: usize) -> PauliHamiltonian {
    let mut h = PauliHamiltonian::new(n).unwrap();
    for _ in 0..terms {
        let ops: Vec<(usize, Pauli)> =
            (0..n).map(|q| (q, [Pauli::I, Pauli::X, Pauli::Y, Pauli::Z][rng.random_range(0..4)])).collect();
        h.add_term(rng.random_range(-1.0..1.0), PauliString::from_ops(&ops)).unwrap();
    }
    h
}
