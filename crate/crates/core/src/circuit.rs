//! Circuit intermediate representation.
//!
//! A [`Circuit`] is an ordered list of [`GateOp`]s over `n_qubits`. Rotation
//! gates do not own an angle; they point at a *parameter group*, and every
//! gate in a group receives the same value when the circuit is bound to a
//! [`ParamVector`]. Groups are allocated as gates are appended, so a caller
//! can tie several rotations to one parameter at construction time.
//!
//! The text form is line based:
//!
//! ```text
//! qubits 4
//! groups 2
//! steps 1
//! RX q0 g0
//! RY q3 g1
//! CNOT q0 q1
//! ```

use std::fmt;
use std::ops::{Deref, DerefMut};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{usage, QasError, Result};

pub const MAX_QUBITS: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum GateKind {
    Rx,
    Ry,
    Rz,
    H,
    Cnot,
}

impl GateKind {
    pub fn is_rotation(self) -> bool {
        matches!(self, GateKind::Rx | GateKind::Ry | GateKind::Rz)
    }

    pub fn mnemonic(self) -> &'static str {
        match self {
            GateKind::Rx => "RX",
            GateKind::Ry => "RY",
            GateKind::Rz => "RZ",
            GateKind::H => "H",
            GateKind::Cnot => "CNOT",
        }
    }
}

/// One gate. `control` is set iff the gate is a CNOT and `param_slot` is set
/// iff it is a rotation; the constructors and [`Circuit::append`] enforce it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct GateOp {
    pub kind: GateKind,
    pub target: usize,
    pub control: Option<usize>,
    pub param_slot: Option<usize>,
}

impl GateOp {
    /// Unbound rotation; the slot is assigned by [`Circuit::append`].
    pub fn rotation(kind: GateKind, target: usize) -> Self {
        debug_assert!(kind.is_rotation());
        GateOp { kind, target, control: None, param_slot: None }
    }

    pub fn rx(target: usize) -> Self {
        Self::rotation(GateKind::Rx, target)
    }

    pub fn ry(target: usize) -> Self {
        Self::rotation(GateKind::Ry, target)
    }

    pub fn rz(target: usize) -> Self {
        Self::rotation(GateKind::Rz, target)
    }

    pub fn h(target: usize) -> Self {
        GateOp { kind: GateKind::H, target, control: None, param_slot: None }
    }

    pub fn cnot(control: usize, target: usize) -> Self {
        GateOp { kind: GateKind::Cnot, target, control: Some(control), param_slot: None }
    }

    /// Qubits touched by the gate.
    pub fn qubits(&self) -> impl Iterator<Item = usize> {
        self.control.into_iter().chain(std::iter::once(self.target))
    }

    fn validate(&self, n_qubits: usize) -> Result<()> {
        if self.target >= n_qubits {
            return usage(format!("target qubit {} out of range for {n_qubits} qubits", self.target));
        }
        match (self.kind, self.control) {
            (GateKind::Cnot, Some(c)) if c >= n_qubits => {
                usage(format!("control qubit {c} out of range for {n_qubits} qubits"))
            }
            (GateKind::Cnot, Some(c)) if c == self.target => {
                usage(format!("CNOT control and target coincide on qubit {c}"))
            }
            (GateKind::Cnot, None) => usage("CNOT without control qubit"),
            (GateKind::Cnot, Some(_)) => Ok(()),
            (_, Some(_)) => usage(format!("{} gate cannot carry a control", self.kind.mnemonic())),
            (_, None) => Ok(()),
        }
    }
}

impl fmt::Display for GateOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (self.kind, self.control, self.param_slot) {
            (GateKind::Cnot, Some(c), _) => write!(f, "CNOT q{} q{}", c, self.target),
            (kind, _, Some(g)) => write!(f, "{} q{} g{}", kind.mnemonic(), self.target, g),
            (kind, _, None) => write!(f, "{} q{}", kind.mnemonic(), self.target),
        }
    }
}

/// Angles (radians), one per parameter group.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ParamVector(pub Vec<f64>);

impl ParamVector {
    pub fn zeros(len: usize) -> Self {
        ParamVector(vec![0.0; len])
    }
}

impl Deref for ParamVector {
    type Target = Vec<f64>;
    fn deref(&self) -> &Vec<f64> {
        &self.0
    }
}

impl DerefMut for ParamVector {
    fn deref_mut(&mut self) -> &mut Vec<f64> {
        &mut self.0
    }
}

impl From<Vec<f64>> for ParamVector {
    fn from(v: Vec<f64>) -> Self {
        ParamVector(v)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Circuit {
    n_qubits: usize,
    gates: Vec<GateOp>,
    n_param_groups: usize,
    depth_steps: usize,
}

impl Circuit {
    pub fn new(n_qubits: usize) -> Result<Self> {
        if n_qubits == 0 || n_qubits > MAX_QUBITS {
            return Err(QasError::Config(format!(
                "circuit width must be in 1..={MAX_QUBITS}, got {n_qubits}"
            )));
        }
        Ok(Circuit { n_qubits, gates: Vec::new(), n_param_groups: 0, depth_steps: 0 })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn gates(&self) -> &[GateOp] {
        &self.gates
    }

    pub fn n_param_groups(&self) -> usize {
        self.n_param_groups
    }

    /// Appends `op`. Rotations join `share_with` when given, otherwise a new
    /// group is allocated. Returns the group the gate was bound to.
    pub fn append(&mut self, mut op: GateOp, share_with: Option<usize>) -> Result<Option<usize>> {
        op.validate(self.n_qubits)?;
        if !op.kind.is_rotation() {
            if share_with.is_some() {
                return usage(format!("{} gate has no parameter to share", op.kind.mnemonic()));
            }
            op.param_slot = None;
            self.gates.push(op);
            return Ok(None);
        }
        let slot = match share_with {
            Some(g) if g < self.n_param_groups => g,
            Some(g) => {
                return usage(format!(
                    "parameter group {g} does not exist ({} allocated)",
                    self.n_param_groups
                ))
            }
            None => {
                self.n_param_groups += 1;
                self.n_param_groups - 1
            }
        };
        op.param_slot = Some(slot);
        self.gates.push(op);
        Ok(Some(slot))
    }

    /// Records that one construction step (environment step) has completed.
    pub fn mark_step(&mut self) {
        self.depth_steps += 1;
    }

    pub fn cnot_count(&self) -> usize {
        self.gates.iter().filter(|g| g.kind == GateKind::Cnot).count()
    }

    pub fn param_count(&self) -> usize {
        self.n_param_groups
    }

    pub fn depth_steps(&self) -> usize {
        self.depth_steps
    }

    pub fn check_params(&self, params: &[f64]) -> Result<()> {
        if params.len() != self.n_param_groups {
            return usage(format!(
                "circuit has {} parameter groups but {} values were supplied",
                self.n_param_groups,
                params.len()
            ));
        }
        Ok(())
    }

    /// Indices of the gates bound to each parameter group.
    pub fn group_members(&self) -> Vec<Vec<usize>> {
        let mut groups = vec![Vec::new(); self.n_param_groups];
        for (i, g) in self.gates.iter().enumerate() {
            if let Some(s) = g.param_slot {
                groups[s].push(i);
            }
        }
        groups
    }

    pub fn to_text(&self) -> String {
        self.to_string()
    }
}

impl fmt::Display for Circuit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "qubits {}", self.n_qubits)?;
        writeln!(f, "groups {}", self.n_param_groups)?;
        writeln!(f, "steps {}", self.depth_steps)?;
        for g in &self.gates {
            writeln!(f, "{g}")?;
        }
        Ok(())
    }
}

fn parse_index(tok: &str, prefix: char, line: usize) -> Result<usize> {
    tok.strip_prefix(prefix)
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| QasError::Parse(format!("line {line}: expected `{prefix}<index>`, got `{tok}`")))
}

impl FromStr for Circuit {
    type Err = QasError;

    fn from_str(s: &str) -> Result<Self> {
        let mut n_qubits = None;
        let mut groups = None;
        let mut steps = 0;
        let mut gates = Vec::new();
        for (ln, raw) in s.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let toks: Vec<&str> = line.split_whitespace().collect();
            let bad = || QasError::Parse(format!("line {}: malformed `{line}`", ln + 1));
            let header_value = || toks.get(1).and_then(|t| t.parse::<usize>().ok()).ok_or_else(bad);
            match toks[0] {
                "qubits" => n_qubits = Some(header_value()?),
                "groups" => groups = Some(header_value()?),
                "steps" => steps = header_value()?,
                "CNOT" => {
                    if toks.len() != 3 {
                        return Err(bad());
                    }
                    let c = parse_index(toks[1], 'q', ln + 1)?;
                    let t = parse_index(toks[2], 'q', ln + 1)?;
                    gates.push(GateOp::cnot(c, t));
                }
                "H" => {
                    if toks.len() != 2 {
                        return Err(bad());
                    }
                    gates.push(GateOp::h(parse_index(toks[1], 'q', ln + 1)?));
                }
                m @ ("RX" | "RY" | "RZ") => {
                    if toks.len() != 3 {
                        return Err(bad());
                    }
                    let kind = match m {
                        "RX" => GateKind::Rx,
                        "RY" => GateKind::Ry,
                        _ => GateKind::Rz,
                    };
                    let mut op = GateOp::rotation(kind, parse_index(toks[1], 'q', ln + 1)?);
                    op.param_slot = Some(parse_index(toks[2], 'g', ln + 1)?);
                    gates.push(op);
                }
                other => return Err(QasError::Parse(format!("line {}: unknown gate `{other}`", ln + 1))),
            }
        }
        let n_qubits = n_qubits.ok_or_else(|| QasError::Parse("missing `qubits` header".into()))?;
        let n_param_groups = groups.ok_or_else(|| QasError::Parse("missing `groups` header".into()))?;
        let mut c = Circuit::new(n_qubits)?;
        for g in &gates {
            g.validate(n_qubits).map_err(|e| QasError::Parse(e.to_string()))?;
            if let Some(s) = g.param_slot {
                if s >= n_param_groups {
                    return Err(QasError::Parse(format!("gate `{g}` references missing group")));
                }
            }
        }
        c.gates = gates;
        c.n_param_groups = n_param_groups;
        c.depth_steps = steps;
        Ok(c)
    }
}
