//! Multi-agent reinforcement-learning quantum architecture search.
//!
//! Several QMIX-trained agents grow a parameterized circuit gate by gate, each
//! agent owning a contiguous block of qubits. After every step the circuit's
//! parameters are optimized against a problem Hamiltonian and the normalized
//! approximation ratio becomes the shared reward.
//!
//! Module map:
//! - [`statevec`], [`hamiltonian`], [`circuit`]: simulator and circuit IR
//! - [`problems`]: Max-Cut and Schwinger Hamiltonians, cubic graph corpus,
//!   QAOA and hardware-efficient baselines
//! - [`vqopt`]: inner-loop parameter optimizers and the approximation ratio
//! - [`nn`]: small hand-differentiated layers (linear, GRU, ADAM)
//! - [`qmix`]: agent/mixer networks, replay and the TD learner
//! - [`env`]: the architecture-search environment
//! - [`experiment`]: configuration, training runs, baselines and reports

pub mod circuit;
pub mod env;
pub mod error;
pub mod experiment;
pub mod hamiltonian;
pub mod nn;
pub mod par;
pub mod problems;
pub mod qmix;
pub mod rng;
pub mod statevec;
pub mod vqopt;

pub use circuit::{Circuit, GateKind, GateOp, ParamVector};
pub use error::{QasError, Result};
pub use hamiltonian::{CompiledHamiltonian, Pauli, PauliHamiltonian, PauliString, SpectrumBounds};
pub use par::Exec;
pub use statevec::StateVector;
