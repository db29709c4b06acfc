//! Circuit intermediate representation shared by every stage of the pipeline.
//!
//! A [`Circuit`] is an ordered list of [`Gate`]s over `num_qubits` qubits and
//! `num_clbits` classical bits. Gates are validated on insertion, so a circuit
//! that exists is always well formed.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CircuitError {
    #[error("{kind} expects {expected} qubit(s), got {got}")]
    Arity {
        kind: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("qubit index {qubit} out of range for {num_qubits}-qubit circuit")]
    QubitOutOfRange { qubit: usize, num_qubits: usize },
    #[error("classical bit {clbit} out of range for {num_clbits} classical bits")]
    ClbitOutOfRange { clbit: usize, num_clbits: usize },
    #[error("gate repeats qubit {0}")]
    DuplicateQubit(usize),
    #[error("data qubit {0} out of range")]
    DataQubitOutOfRange(usize),
    #[error("benchmark needs at least 2 qubits, got {0}")]
    InvalidSize(usize),
    #[error("{0} has no adjoint")]
    NoAdjoint(&'static str),
}

/// Pauli applied by a classically conditioned correction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CondPauli {
    X,
    Z,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum GateKind {
    H,
    X,
    Z,
    T,
    Tdg,
    Rz(f64),
    Ry(f64),
    Cx,
    Ccx,
    /// Measure the qubit into the given classical bit.
    Measure(usize),
    Reset,
    /// Apply the Pauli if the classical bit reads 1.
    Conditioned {
        pauli: CondPauli,
        clbit: usize,
    },
}

impl GateKind {
    pub fn name(&self) -> &'static str {
        match self {
            GateKind::H => "h",
            GateKind::X => "x",
            GateKind::Z => "z",
            GateKind::T => "t",
            GateKind::Tdg => "tdg",
            GateKind::Rz(_) => "rz",
            GateKind::Ry(_) => "ry",
            GateKind::Cx => "cx",
            GateKind::Ccx => "ccx",
            GateKind::Measure(_) => "measure",
            GateKind::Reset => "reset",
            GateKind::Conditioned {
                pauli: CondPauli::X, ..
            } => "if-x",
            GateKind::Conditioned {
                pauli: CondPauli::Z, ..
            } => "if-z",
        }
    }

    pub fn arity(&self) -> usize {
        match self {
            GateKind::Cx => 2,
            GateKind::Ccx => 3,
            _ => 1,
        }
    }

    pub fn is_unitary(&self) -> bool {
        !matches!(
            self,
            GateKind::Measure(_) | GateKind::Reset | GateKind::Conditioned { .. }
        )
    }

    /// Classical bit read or written by this gate, if any.
    pub fn clbit(&self) -> Option<usize> {
        match *self {
            GateKind::Measure(c) => Some(c),
            GateKind::Conditioned { clbit, .. } => Some(clbit),
            _ => None,
        }
    }
}

/// Whether a gate is an ordinary local operation or part of a communication
/// primitive (and therefore subject to the network noise level).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub enum Tag {
    #[default]
    Local,
    Comm,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Gate {
    pub kind: GateKind,
    pub qubits: Vec<usize>,
    pub tag: Tag,
}

impl Gate {
    pub fn new(kind: GateKind, qubits: &[usize]) -> Self {
        Gate {
            kind,
            qubits: qubits.to_vec(),
            tag: Tag::Local,
        }
    }

    pub fn h(q: usize) -> Self {
        Self::new(GateKind::H, &[q])
    }
    pub fn x(q: usize) -> Self {
        Self::new(GateKind::X, &[q])
    }
    pub fn z(q: usize) -> Self {
        Self::new(GateKind::Z, &[q])
    }
    pub fn t(q: usize) -> Self {
        Self::new(GateKind::T, &[q])
    }
    pub fn tdg(q: usize) -> Self {
        Self::new(GateKind::Tdg, &[q])
    }
    pub fn rz(theta: f64, q: usize) -> Self {
        Self::new(GateKind::Rz(theta), &[q])
    }
    pub fn ry(theta: f64, q: usize) -> Self {
        Self::new(GateKind::Ry(theta), &[q])
    }
    pub fn cx(control: usize, target: usize) -> Self {
        Self::new(GateKind::Cx, &[control, target])
    }
    pub fn ccx(c0: usize, c1: usize, target: usize) -> Self {
        Self::new(GateKind::Ccx, &[c0, c1, target])
    }
    pub fn measure(q: usize, clbit: usize) -> Self {
        Self::new(GateKind::Measure(clbit), &[q])
    }
    pub fn reset(q: usize) -> Self {
        Self::new(GateKind::Reset, &[q])
    }
    pub fn conditioned(pauli: CondPauli, q: usize, clbit: usize) -> Self {
        Self::new(GateKind::Conditioned { pauli, clbit }, &[q])
    }

    pub fn with_tag(mut self, tag: Tag) -> Self {
        self.tag = tag;
        self
    }

    pub fn is_comm(&self) -> bool {
        self.tag == Tag::Comm
    }

    pub fn is_unitary(&self) -> bool {
        self.kind.is_unitary()
    }

    /// Unitary gate acting on exactly two qubits.
    pub fn is_two_qubit_unitary(&self) -> bool {
        self.kind.is_unitary() && self.qubits.len() == 2
    }

    pub fn validate(&self, num_qubits: usize, num_clbits: usize) -> Result<(), CircuitError> {
        let expected = self.kind.arity();
        if self.qubits.len() != expected {
            return Err(CircuitError::Arity {
                kind: self.kind.name(),
                expected,
                got: self.qubits.len(),
            });
        }
        for (i, &q) in self.qubits.iter().enumerate() {
            if q >= num_qubits {
                return Err(CircuitError::QubitOutOfRange { qubit: q, num_qubits });
            }
            if self.qubits[..i].contains(&q) {
                return Err(CircuitError::DuplicateQubit(q));
            }
        }
        if let Some(c) = self.kind.clbit() {
            if c >= num_clbits {
                return Err(CircuitError::ClbitOutOfRange { clbit: c, num_clbits });
            }
        }
        Ok(())
    }

    /// Inverse gate. Self-inverse kinds map to themselves, rotations negate
    /// their angle and `T` swaps with `Tdg`. The tag is kept.
    pub fn adjoint(&self) -> Result<Gate, CircuitError> {
        let kind = match self.kind {
            GateKind::H => GateKind::H,
            GateKind::X => GateKind::X,
            GateKind::Z => GateKind::Z,
            GateKind::Cx => GateKind::Cx,
            GateKind::Ccx => GateKind::Ccx,
            GateKind::T => GateKind::Tdg,
            GateKind::Tdg => GateKind::T,
            GateKind::Rz(theta) => GateKind::Rz(-theta),
            GateKind::Ry(theta) => GateKind::Ry(-theta),
            other => return Err(CircuitError::NoAdjoint(other.name())),
        };
        Ok(Gate {
            kind,
            qubits: self.qubits.clone(),
            tag: self.tag,
        })
    }
}

impl fmt::Display for Gate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind {
            GateKind::Rz(a) | GateKind::Ry(a) => write!(f, "{}({})", self.kind.name(), a)?,
            GateKind::Measure(c) => write!(f, "measure->c{}", c)?,
            GateKind::Conditioned { clbit, .. } => write!(f, "{}[c{}]", self.kind.name(), clbit)?,
            _ => write!(f, "{}", self.kind.name())?,
        }
        for q in &self.qubits {
            write!(f, " q{}", q)?;
        }
        if self.is_comm() {
            write!(f, " [comm]")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Circuit {
    num_qubits: usize,
    num_clbits: usize,
    gates: Vec<Gate>,
    data_qubits: BTreeSet<usize>,
}

impl Circuit {
    /// Empty circuit in which every qubit is a data qubit.
    pub fn new(num_qubits: usize, num_clbits: usize) -> Self {
        Circuit {
            num_qubits,
            num_clbits,
            gates: Vec::new(),
            data_qubits: (0..num_qubits).collect(),
        }
    }

    pub fn num_qubits(&self) -> usize {
        self.num_qubits
    }

    pub fn num_clbits(&self) -> usize {
        self.num_clbits
    }

    pub fn gates(&self) -> &[Gate] {
        &self.gates
    }

    pub fn len(&self) -> usize {
        self.gates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gates.is_empty()
    }

    pub fn data_qubits(&self) -> &BTreeSet<usize> {
        &self.data_qubits
    }

    pub fn set_data_qubits<I: IntoIterator<Item = usize>>(&mut self, qubits: I) -> Result<(), CircuitError> {
        let set: BTreeSet<usize> = qubits.into_iter().collect();
        if let Some(&bad) = set.iter().find(|&&q| q >= self.num_qubits) {
            return Err(CircuitError::DataQubitOutOfRange(bad));
        }
        self.data_qubits = set;
        Ok(())
    }

    pub fn push(&mut self, gate: Gate) -> Result<(), CircuitError> {
        gate.validate(self.num_qubits, self.num_clbits)?;
        self.gates.push(gate);
        Ok(())
    }

    pub fn extend<I: IntoIterator<Item = Gate>>(&mut self, gates: I) -> Result<(), CircuitError> {
        for g in gates {
            self.push(g)?;
        }
        Ok(())
    }

    /// Grow the register sizes. Existing gates stay valid.
    pub fn widen(&mut self, num_qubits: usize, num_clbits: usize) {
        self.num_qubits = self.num_qubits.max(num_qubits);
        self.num_clbits = self.num_clbits.max(num_clbits);
    }

    /// Copy of this circuit's registers and data-qubit set, with no gates.
    pub fn empty_like(&self) -> Circuit {
        Circuit {
            num_qubits: self.num_qubits,
            num_clbits: self.num_clbits,
            gates: Vec::new(),
            data_qubits: self.data_qubits.clone(),
        }
    }

    pub fn unitary_count(&self) -> usize {
        self.gates.iter().filter(|g| g.is_unitary()).count()
    }

    pub fn comm_count(&self) -> usize {
        self.gates.iter().filter(|g| g.is_comm()).count()
    }

    pub fn count_kind(&self, pred: impl Fn(&GateKind) -> bool) -> usize {
        self.gates.iter().filter(|g| pred(&g.kind)).count()
    }

    pub fn contains_ccx(&self) -> bool {
        self.gates.iter().any(|g| g.kind == GateKind::Ccx)
    }

    pub fn depth(&self) -> usize {
        depth(self.gates.iter(), self.num_qubits, self.num_clbits)
    }
}

/// Layered depth of a gate sequence.
///
/// Each gate is placed one layer after the latest layer that already uses any
/// of its qubits or its classical bit, so dependent gates never share or
/// reorder layers. Non-unitary gates occupy a slot like any other gate.
pub fn depth<'a, I>(gates: I, num_qubits: usize, num_clbits: usize) -> usize
where
    I: IntoIterator<Item = &'a Gate>,
{
    let mut qubit_layer = vec![0usize; num_qubits];
    let mut clbit_layer = vec![0usize; num_clbits];
    let mut total = 0;
    for g in gates {
        let mut layer = g.qubits.iter().map(|&q| qubit_layer[q]).max().unwrap_or(0);
        if let Some(c) = g.kind.clbit() {
            layer = layer.max(clbit_layer[c]);
        }
        let layer = layer + 1;
        for &q in &g.qubits {
            qubit_layer[q] = layer;
        }
        if let Some(c) = g.kind.clbit() {
            clbit_layer[c] = layer;
        }
        total = total.max(layer);
    }
    total
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Benchmark {
    Ghz,
    Dj,
    W,
}

impl Benchmark {
    pub fn name(&self) -> &'static str {
        match self {
            Benchmark::Ghz => "ghz",
            Benchmark::Dj => "dj",
            Benchmark::W => "w",
        }
    }

    /// Total qubits used by the benchmark on `n` data qubits.
    pub fn total_qubits(&self, n: usize) -> usize {
        match self {
            Benchmark::Dj => n + 1,
            _ => n,
        }
    }
}

impl fmt::Display for Benchmark {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Benchmark {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "ghz" => Ok(Benchmark::Ghz),
            "dj" => Ok(Benchmark::Dj),
            "w" => Ok(Benchmark::W),
            other => Err(format!("unknown algorithm '{}'", other)),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DjOracle {
    #[default]
    Balanced,
    Constant,
}

/// Canonical benchmark circuit on `n` data qubits.
///
/// * GHZ: `H q0` followed by the CX ladder `q_i -> q_{i+1}`.
/// * DJ: data qubits `0..n`, oracle ancilla `n`. The balanced oracle is a CX
///   from every data qubit onto the ancilla; the constant oracle is empty.
///   Data qubits are measured into `c[0..n]`.
/// * W: `X q0`, then for each neighbouring pair a controlled-RY split
///   (two RY + two CX) followed by a CX that moves the excitation along.
pub fn generate_benchmark(kind: Benchmark, n: usize, oracle: DjOracle) -> Result<Circuit, CircuitError> {
    if n < 2 {
        return Err(CircuitError::InvalidSize(n));
    }
    let c = match kind {
        Benchmark::Ghz => {
            let mut c = Circuit::new(n, 0);
            c.push(Gate::h(0))?;
            for i in 0..n - 1 {
                c.push(Gate::cx(i, i + 1))?;
            }
            c
        }
        Benchmark::Dj => {
            let anc = n;
            let mut c = Circuit::new(n + 1, n);
            c.set_data_qubits(0..n)?;
            c.push(Gate::x(anc))?;
            c.push(Gate::h(anc))?;
            for q in 0..n {
                c.push(Gate::h(q))?;
            }
            if oracle == DjOracle::Balanced {
                for q in 0..n {
                    c.push(Gate::cx(q, anc))?;
                }
            }
            for q in 0..n {
                c.push(Gate::h(q))?;
            }
            for q in 0..n {
                c.push(Gate::measure(q, q))?;
            }
            c
        }
        Benchmark::W => {
            let mut c = Circuit::new(n, 0);
            c.push(Gate::x(0))?;
            for i in 0..n - 1 {
                let remaining = (n - i) as f64;
                let theta = 2.0 * (1.0 / remaining).sqrt().acos();
                // controlled-RY(theta) on q_{i+1}, controlled by q_i
                c.push(Gate::ry(theta / 2.0, i + 1))?;
                c.push(Gate::cx(i, i + 1))?;
                c.push(Gate::ry(-theta / 2.0, i + 1))?;
                c.push(Gate::cx(i, i + 1))?;
                c.push(Gate::cx(i + 1, i))?;
            }
            c
        }
    };
    Ok(c)
}

/// Replace every CCX by the 15-gate Clifford+T network (2 H, 6 CX, 7 T/Tdg).
pub fn decompose_toffoli(c: &Circuit) -> Circuit {
    let mut out = c.empty_like();
    for g in c.gates() {
        if g.kind == GateKind::Ccx {
            let (a, b, t) = (g.qubits[0], g.qubits[1], g.qubits[2]);
            let seq = [
                Gate::h(t),
                Gate::cx(b, t),
                Gate::tdg(t),
                Gate::cx(a, t),
                Gate::t(t),
                Gate::cx(b, t),
                Gate::tdg(t),
                Gate::cx(a, t),
                Gate::t(b),
                Gate::t(t),
                Gate::h(t),
                Gate::cx(a, b),
                Gate::t(a),
                Gate::tdg(b),
                Gate::cx(a, b),
            ];
            out.gates.extend(seq.into_iter().map(|x| x.with_tag(g.tag)));
        } else {
            out.gates.push(g.clone());
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ghz3_is_the_ladder() {
        let c = generate_benchmark(Benchmark::Ghz, 3, DjOracle::Balanced).unwrap();
        assert_eq!(c.gates(), &[Gate::h(0), Gate::cx(0, 1), Gate::cx(1, 2)]);
        assert_eq!(c.depth(), 3);
    }

    #[test]
    fn benchmark_rejects_tiny_sizes() {
        for kind in [Benchmark::Ghz, Benchmark::Dj, Benchmark::W] {
            assert_eq!(
                generate_benchmark(kind, 1, DjOracle::Balanced),
                Err(CircuitError::InvalidSize(1))
            );
        }
    }

    #[test]
    fn dj_excludes_oracle_ancilla_from_data() {
        let c = generate_benchmark(Benchmark::Dj, 3, DjOracle::Balanced).unwrap();
        assert_eq!(c.num_qubits(), 4);
        assert_eq!(c.data_qubits().iter().copied().collect::<Vec<_>>(), vec![0, 1, 2]);
        let constant = generate_benchmark(Benchmark::Dj, 3, DjOracle::Constant).unwrap();
        assert_eq!(constant.count_kind(|k| *k == GateKind::Cx), 0);
    }

    #[test]
    fn depth_edge_cases() {
        assert_eq!(Circuit::new(3, 0).depth(), 0);
        let mut c = Circuit::new(4, 0);
        for q in 0..4 {
            c.push(Gate::h(q)).unwrap();
        }
        assert_eq!(c.depth(), 1);
    }

    #[test]
    fn depth_respects_clbit_dependencies() {
        let mut c = Circuit::new(2, 1);
        c.push(Gate::measure(0, 0)).unwrap();
        c.push(Gate::conditioned(CondPauli::X, 1, 0)).unwrap();
        assert_eq!(c.depth(), 2);
    }

    #[test]
    fn adjoint_cases() {
        assert_eq!(Gate::h(0).adjoint().unwrap(), Gate::h(0));
        assert_eq!(Gate::rz(0.7, 0).adjoint().unwrap(), Gate::rz(-0.7, 0));
        assert_eq!(Gate::cx(0, 1).adjoint().unwrap(), Gate::cx(0, 1));
        assert_eq!(Gate::t(2).adjoint().unwrap(), Gate::tdg(2));
        let comm = Gate::ry(0.3, 1).with_tag(Tag::Comm);
        assert_eq!(comm.adjoint().unwrap().tag, Tag::Comm);
        assert!(matches!(Gate::measure(0, 0).adjoint(), Err(CircuitError::NoAdjoint(_))));
        assert!(Gate::reset(0).adjoint().is_err());
    }

    #[test]
    fn push_validates() {
        let mut c = Circuit::new(2, 1);
        assert!(matches!(c.push(Gate::h(2)), Err(CircuitError::QubitOutOfRange { .. })));
        assert_eq!(c.push(Gate::cx(1, 1)), Err(CircuitError::DuplicateQubit(1)));
        assert!(matches!(
            c.push(Gate::measure(0, 1)),
            Err(CircuitError::ClbitOutOfRange { .. })
        ));
        assert!(matches!(
            c.push(Gate::new(GateKind::Cx, &[0])),
            Err(CircuitError::Arity { expected: 2, .. })
        ));
        assert!(c.set_data_qubits([0, 5]).is_err());
    }

    #[test]
    fn toffoli_counts() {
        let mut c = Circuit::new(3, 0);
        c.push(Gate::ccx(0, 1, 2)).unwrap();
        let d = decompose_toffoli(&c);
        assert_eq!(d.len(), 15);
        assert_eq!(d.count_kind(|k| *k == GateKind::H), 2);
        assert_eq!(d.count_kind(|k| *k == GateKind::Cx), 6);
        assert_eq!(d.count_kind(|k| matches!(k, GateKind::T | GateKind::Tdg)), 7);

        c.push(Gate::ccx(2, 0, 1)).unwrap();
        let d = decompose_toffoli(&c);
        assert_eq!(d.len(), 30);
        assert!(!d.contains_ccx());

        let ghz = generate_benchmark(Benchmark::Ghz, 4, DjOracle::Balanced).unwrap();
        assert_eq!(decompose_toffoli(&ghz), ghz);
    }
}
