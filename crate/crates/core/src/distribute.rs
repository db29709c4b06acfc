//! Lowering of a monolithic circuit onto partitions.
//!
//! Cross-partition CX gates are replaced by teleportation primitives. A
//! teleport uses a Bell pair shared between a free qubit in the sender's
//! partition and a free qubit in the receiver's partition; only the Bell-pair
//! preparation runs over the network and is tagged [`Tag::Comm`] (or the
//! whole template, with [`CommScope::WholeTemplate`]).
//!
//! Each partition owns a pool of free communication qubits. Pools start with
//! one ancilla per partition; a qubit vacated by a teleport returns to its
//! partition's pool, and a new ancilla is appended only when a pool is empty.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::circuit::{depth, Circuit, CircuitError, CondPauli, Gate, GateKind, Tag};
use crate::partition::Assignment;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DistributeError {
    #[error("teleport template needs three distinct qubits, got {0:?}")]
    QubitCollision([usize; 3]),
    #[error("assignment covers {got} qubits, circuit has {want}")]
    AssignmentSize { got: usize, want: usize },
    #[error("circuit contains CCX gates; decompose Toffoli gates first")]
    RequiresDecomposition,
    #[error(transparent)]
    Circuit(#[from] CircuitError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LoweringMode {
    /// Teleport the control over, apply the CX, teleport it back.
    #[default]
    Roundtrip,
    /// Teleport the control over and leave it there.
    Migrate,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CommScope {
    /// Only the Bell-pair preparation (H + CX) is a network operation.
    #[default]
    BellOnly,
    /// Every gate of the teleport template is a network operation.
    WholeTemplate,
}

impl fmt::Display for LoweringMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            LoweringMode::Roundtrip => "roundtrip",
            LoweringMode::Migrate => "migrate",
        })
    }
}

impl fmt::Display for CommScope {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CommScope::BellOnly => "bell_only",
            CommScope::WholeTemplate => "whole_template",
        })
    }
}

/// Teleport `src` onto `anc_far` through a Bell pair on `(anc_near, anc_far)`.
///
/// Ten gates: two resets, Bell preparation (H, CX), Bell measurement
/// (CX, H, two measurements into `c0`, `c1`) and the conditioned X/Z
/// corrections on `anc_far`.
pub fn teleport_template(
    src: usize,
    anc_near: usize,
    anc_far: usize,
    c0: usize,
    c1: usize,
    scope: CommScope,
) -> Result<Vec<Gate>, DistributeError> {
    if src == anc_near || src == anc_far || anc_near == anc_far {
        return Err(DistributeError::QubitCollision([src, anc_near, anc_far]));
    }
    let comm = Tag::Comm;
    let rest = match scope {
        CommScope::BellOnly => Tag::Local,
        CommScope::WholeTemplate => Tag::Comm,
    };
    Ok(vec![
        Gate::reset(anc_near).with_tag(rest),
        Gate::reset(anc_far).with_tag(rest),
        Gate::h(anc_near).with_tag(comm),
        Gate::cx(anc_near, anc_far).with_tag(comm),
        Gate::cx(src, anc_near).with_tag(rest),
        Gate::h(src).with_tag(rest),
        Gate::measure(src, c0).with_tag(rest),
        Gate::measure(anc_near, c1).with_tag(rest),
        Gate::conditioned(CondPauli::X, anc_far, c1).with_tag(rest),
        Gate::conditioned(CondPauli::Z, anc_far, c0).with_tag(rest),
    ])
}

/// A lowered circuit plus the bookkeeping needed to simulate and fold it.
#[derive(Debug, Clone, PartialEq)]
pub struct DistributedCircuit {
    pub circuit: Circuit,
    /// Partition of every physical qubit, ancillas included.
    pub assignment: Assignment,
    /// Communication qubits allocated in each partition.
    pub ancillas_of: Vec<Vec<usize>>,
    pub comm_gate_indices: BTreeSet<usize>,
    /// Final physical location of each original data qubit, in ascending
    /// order of the original index.
    pub readout: Vec<usize>,
    pub teleports: usize,
    pub mode: LoweringMode,
    pub scope: CommScope,
    /// Qubit count of the monolithic circuit.
    pub original_qubits: usize,
}

impl DistributedCircuit {
    pub fn ancilla_count(&self) -> usize {
        self.ancillas_of.iter().map(Vec::len).sum()
    }

    pub fn k(&self) -> usize {
        self.assignment.k()
    }

    /// Partition a gate runs on, or `None` if it spans partitions.
    pub fn partition_of_gate(&self, g: &Gate) -> Option<usize> {
        let p = self.assignment.part_of(g.qubits[0]);
        g.qubits.iter().all(|&q| self.assignment.part_of(q) == p).then_some(p)
    }

    /// Replace the gate list, keeping the partition bookkeeping.
    /// `comm_gate_indices` is recomputed from the tags.
    pub fn with_gates(&self, gates: Vec<Gate>) -> Result<DistributedCircuit, CircuitError> {
        let mut circuit = self.circuit.empty_like();
        circuit.extend(gates)?;
        let comm_gate_indices = comm_indices(&circuit);
        Ok(DistributedCircuit {
            circuit,
            comm_gate_indices,
            ..self.clone()
        })
    }
}

fn comm_indices(c: &Circuit) -> BTreeSet<usize> {
    c.gates()
        .iter()
        .enumerate()
        .filter(|(_, g)| g.is_comm())
        .map(|(i, _)| i)
        .collect()
}

struct Pools {
    free: Vec<BTreeSet<usize>>,
    ancillas_of: Vec<Vec<usize>>,
    part_of_extra: Vec<usize>,
    next_qubit: usize,
}

impl Pools {
    fn new(k: usize, first: usize) -> Self {
        let mut pools = Pools {
            free: vec![BTreeSet::new(); k],
            ancillas_of: vec![Vec::new(); k],
            part_of_extra: Vec::new(),
            next_qubit: first,
        };
        for p in 0..k {
            let q = pools.allocate(p);
            pools.free[p].insert(q);
        }
        pools
    }

    fn allocate(&mut self, p: usize) -> usize {
        let q = self.next_qubit;
        self.next_qubit += 1;
        self.ancillas_of[p].push(q);
        self.part_of_extra.push(p);
        q
    }

    fn take(&mut self, p: usize) -> usize {
        self.free[p].pop_first().unwrap_or_else(|| self.allocate(p))
    }

    fn give(&mut self, p: usize, q: usize) {
        self.free[p].insert(q);
    }
}

/// Lower `c` onto the partitions of `a`.
///
/// Intra-partition gates are copied (through the current logical-to-physical
/// map). A cross-partition `CX(ctl, tgt)` becomes a teleport of `ctl` into a
/// free qubit of `tgt`'s partition followed by a local CX; in roundtrip mode
/// the state is then teleported back into `ctl`'s own qubit, in migrate mode
/// `ctl` stays at its new location. Every teleport gets two fresh classical
/// bits.
pub fn lower(
    c: &Circuit,
    a: &Assignment,
    mode: LoweringMode,
    scope: CommScope,
) -> Result<DistributedCircuit, DistributeError> {
    if a.len() != c.num_qubits() {
        return Err(DistributeError::AssignmentSize {
            got: a.len(),
            want: c.num_qubits(),
        });
    }
    if c.contains_ccx() {
        return Err(DistributeError::RequiresDecomposition);
    }
    let n = c.num_qubits();
    let k = a.k();
    let mut pools = Pools::new(k, n);
    let part = |q: usize, pools: &Pools| {
        if q < n {
            a.part_of(q)
        } else {
            pools.part_of_extra[q - n]
        }
    };
    let mut phys: Vec<usize> = (0..n).collect();
    let mut gates: Vec<Gate> = Vec::with_capacity(c.len());
    let mut next_clbit = c.num_clbits();
    let mut teleports = 0;

    let mut fresh_bits = || {
        let bits = (next_clbit, next_clbit + 1);
        next_clbit += 2;
        bits
    };

    for g in c.gates() {
        let mapped: Vec<usize> = g.qubits.iter().map(|&q| phys[q]).collect();
        let crosses = g.kind == GateKind::Cx && part(mapped[0], &pools) != part(mapped[1], &pools);
        if !crosses {
            gates.push(Gate {
                kind: g.kind,
                qubits: mapped,
                tag: g.tag,
            });
            continue;
        }

        let (ctl, tgt) = (mapped[0], mapped[1]);
        let (home, away) = (part(ctl, &pools), part(tgt, &pools));
        let near = pools.take(home);
        let far = pools.take(away);
        let (c0, c1) = fresh_bits();
        gates.extend(teleport_template(ctl, near, far, c0, c1, scope)?);
        teleports += 1;
        pools.give(home, near);
        gates.push(Gate::cx(far, tgt).with_tag(g.tag));

        match mode {
            LoweringMode::Roundtrip => {
                let back_near = pools.take(away);
                let (c0, c1) = fresh_bits();
                gates.extend(teleport_template(far, back_near, ctl, c0, c1, scope)?);
                teleports += 1;
                pools.give(away, back_near);
                pools.give(away, far);
            }
            LoweringMode::Migrate => {
                phys[g.qubits[0]] = far;
                pools.give(home, ctl);
            }
        }
    }

    let total = pools.next_qubit;
    let mut circuit = Circuit::new(total, next_clbit);
    circuit.set_data_qubits(c.data_qubits().iter().copied())?;
    circuit.extend(gates)?;
    let assignment = a.extended(&pools.part_of_extra);
    let readout = c.data_qubits().iter().map(|&q| phys[q]).collect();
    Ok(DistributedCircuit {
        comm_gate_indices: comm_indices(&circuit),
        circuit,
        assignment,
        ancillas_of: pools.ancillas_of,
        readout,
        teleports,
        mode,
        scope,
        original_qubits: n,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DistributedStats {
    pub comm_gates: usize,
    pub teleports: usize,
    pub ancillas: usize,
    pub depth: usize,
    /// Depth of the gates touching each partition's qubits.
    pub partition_depths: Vec<usize>,
    pub partition_sizes: Vec<usize>,
}

pub fn distributed_stats(d: &DistributedCircuit) -> DistributedStats {
    let c = &d.circuit;
    let partition_depths = (0..d.k())
        .map(|p| {
            let touching = c
                .gates()
                .iter()
                .filter(|g| g.qubits.iter().any(|&q| d.assignment.part_of(q) == p));
            depth(touching, c.num_qubits(), c.num_clbits())
        })
        .collect();
    DistributedStats {
        comm_gates: d.comm_gate_indices.len(),
        teleports: d.teleports,
        ancillas: d.ancilla_count(),
        depth: c.depth(),
        partition_depths,
        partition_sizes: d.assignment.as_slice()[..d.original_qubits]
            .iter()
            .fold(vec![0; d.k()], |mut s, &p| {
                s[p] += 1;
                s
            }),
    }
}

/// Depth of each partition's local sub-circuit: the non-comm unitary gates
/// acting only on that partition's qubits.
pub fn local_subcircuit_depths(d: &DistributedCircuit) -> Vec<usize> {
    let c = &d.circuit;
    (0..d.k())
        .map(|p| {
            let local = c
                .gates()
                .iter()
                .filter(|g| g.is_unitary() && !g.is_comm() && d.partition_of_gate(g) == Some(p));
            depth(local, c.num_qubits(), c.num_clbits())
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::{generate_benchmark, Benchmark, DjOracle};

    fn ghz4() -> Circuit {
        generate_benchmark(Benchmark::Ghz, 4, DjOracle::Balanced).unwrap()
    }

    #[test]
    fn template_shape() {
        let t = teleport_template(0, 1, 2, 0, 1, CommScope::BellOnly).unwrap();
        assert_eq!(t.len(), 10);
        assert_eq!(t.iter().filter(|g| g.is_comm()).count(), 2);
        assert_eq!(t[0].kind, GateKind::Reset);
        assert_eq!(t[1].kind, GateKind::Reset);
        let all = teleport_template(0, 1, 2, 0, 1, CommScope::WholeTemplate).unwrap();
        assert!(all.iter().all(|g| g.is_comm()));
        assert_eq!(
            teleport_template(0, 0, 2, 0, 1, CommScope::BellOnly),
            Err(DistributeError::QubitCollision([0, 0, 2]))
        );
    }

    #[test]
    fn zero_cut_lowering_is_identity() {
        let c = ghz4();
        let a = Assignment::new(vec![0; 4], 1).unwrap();
        let d = lower(&c, &a, LoweringMode::Roundtrip, CommScope::BellOnly).unwrap();
        assert_eq!(d.circuit.gates(), c.gates());
        assert!(d.comm_gate_indices.is_empty());
        assert_eq!(distributed_stats(&d).teleports, 0);
        assert_eq!(d.readout, vec![0, 1, 2, 3]);
    }

    #[test]
    fn ghz4_roundtrip_counts() {
        let a = Assignment::new(vec![0, 0, 1, 1], 2).unwrap();
        let d = lower(&ghz4(), &a, LoweringMode::Roundtrip, CommScope::BellOnly).unwrap();
        // H, CX01, CX23 kept; CX12 becomes two templates around a local CX
        assert_eq!(d.circuit.len(), 3 + 2 * 10 + 1);
        let s = distributed_stats(&d);
        assert_eq!(s.teleports, 2);
        assert_eq!(s.comm_gates, 4);
        // initial ancilla per partition plus a second one in the receiving
        // partition for the return teleport's Bell half
        assert_eq!(s.ancillas, 3);
        assert_eq!(d.ancillas_of, vec![vec![4], vec![5, 6]]);
        assert_eq!(s.partition_sizes, vec![2, 2]);
    }

    #[test]
    fn ghz4_migrate_counts() {
        let a = Assignment::new(vec![0, 0, 1, 1], 2).unwrap();
        let d = lower(&ghz4(), &a, LoweringMode::Migrate, CommScope::BellOnly).unwrap();
        assert_eq!(d.teleports, 1);
        assert_eq!(d.circuit.len(), 2 + 10 + 1 + 1);
        assert_eq!(d.ancilla_count(), 2);
        // logical qubit 1 now lives on partition 1's ancilla
        assert_eq!(d.readout, vec![0, 5, 2, 3]);
    }

    #[test]
    fn no_unitary_two_qubit_gate_crosses_after_lowering() {
        for mode in [LoweringMode::Roundtrip, LoweringMode::Migrate] {
            let c = generate_benchmark(Benchmark::Dj, 5, DjOracle::Balanced).unwrap();
            let a = Assignment::new(vec![0, 1, 2, 0, 1, 2], 3).unwrap();
            let d = lower(&c, &a, mode, CommScope::BellOnly).unwrap();
            for g in d.circuit.gates() {
                if g.is_two_qubit_unitary() && !g.is_comm() {
                    assert!(d.partition_of_gate(g).is_some(), "{} crosses", g);
                }
                if g.is_comm() && g.qubits.len() == 2 {
                    assert!(d.partition_of_gate(g).is_none(), "{} is local", g);
                }
            }
            let writes: Vec<usize> = d
                .circuit
                .gates()
                .iter()
                .filter_map(|g| match g.kind {
                    GateKind::Measure(c) => Some(c),
                    _ => None,
                })
                .collect();
            let unique: BTreeSet<usize> = writes.iter().copied().collect();
            assert_eq!(unique.len(), writes.len(), "clbits must be single-writer");
        }
    }

    #[test]
    fn assignment_size_mismatch() {
        let a = Assignment::new(vec![0, 1], 2).unwrap();
        assert!(matches!(
            lower(&ghz4(), &a, LoweringMode::Roundtrip, CommScope::BellOnly),
            Err(DistributeError::AssignmentSize { .. })
        ));
    }
}
