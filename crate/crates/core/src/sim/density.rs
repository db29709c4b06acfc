//! Exact density-matrix backend.
//!
//! The state only holds qubits that are currently live: a qubit joins in
//! `|0><0|` at its first use and is traced out after its last use, or when it
//! is reset. Circuits that recycle communication ancillas therefore never pay
//! for their full width at once.

use std::collections::BTreeSet;

use num_complex::Complex64;

use super::gates::{pauli, unitary_matrix};
use super::{NoiseModel, Observable, SimError};
use crate::circuit::{Circuit, CondPauli, Gate, GateKind};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Density matrix over an ordered list of qubits. Slot `s` of the matrix
/// index holds qubit `qubits[s]`.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityState {
    qubits: Vec<usize>,
    matrix: Vec<Complex64>,
}

impl DensityState {
    /// `|0...0><0...0|` on qubits `0..n`.
    pub fn new(n: usize) -> Self {
        let dim = 1usize << n;
        let mut matrix = vec![ZERO; dim * dim];
        matrix[0] = Complex64::new(1.0, 0.0);
        DensityState {
            qubits: (0..n).collect(),
            matrix,
        }
    }

    /// Pure state `|psi><psi|` on qubits `0..n`; qubit `q` is bit `q` of the
    /// amplitude index.
    pub fn from_pure(amplitudes: &[Complex64]) -> Self {
        let dim = amplitudes.len();
        assert!(dim.is_power_of_two(), "amplitude count must be a power of two");
        let mut matrix = vec![ZERO; dim * dim];
        for r in 0..dim {
            for c in 0..dim {
                matrix[r * dim + c] = amplitudes[r] * amplitudes[c].conj();
            }
        }
        DensityState {
            qubits: (0..dim.trailing_zeros() as usize).collect(),
            matrix,
        }
    }

    pub fn maximally_mixed(n: usize) -> Self {
        let dim = 1usize << n;
        let mut matrix = vec![ZERO; dim * dim];
        for i in 0..dim {
            matrix[i * dim + i] = Complex64::new(1.0 / dim as f64, 0.0);
        }
        DensityState {
            qubits: (0..n).collect(),
            matrix,
        }
    }

    fn empty() -> Self {
        DensityState {
            qubits: Vec::new(),
            matrix: vec![Complex64::new(1.0, 0.0)],
        }
    }

    pub fn qubits(&self) -> &[usize] {
        &self.qubits
    }

    pub fn dim(&self) -> usize {
        1 << self.qubits.len()
    }

    pub fn matrix(&self) -> &[Complex64] {
        &self.matrix
    }

    pub fn entry(&self, row: usize, col: usize) -> Complex64 {
        self.matrix[row * self.dim() + col]
    }

    fn slot(&self, q: usize) -> usize {
        self.qubits
            .iter()
            .position(|&x| x == q)
            .unwrap_or_else(|| panic!("qubit {} is not part of this state", q))
    }

    pub fn contains(&self, q: usize) -> bool {
        self.qubits.contains(&q)
    }

    pub fn trace(&self) -> Complex64 {
        let dim = self.dim();
        (0..dim).map(|i| self.matrix[i * dim + i]).sum()
    }

    /// Largest elementwise deviation from Hermiticity.
    pub fn hermiticity_error(&self) -> f64 {
        let dim = self.dim();
        let mut worst: f64 = 0.0;
        for r in 0..dim {
            for c in r..dim {
                worst = worst.max((self.matrix[r * dim + c] - self.matrix[c * dim + r].conj()).norm());
            }
        }
        worst
    }

    /// Indices whose bits at `slots` are all zero.
    fn bases(&self, slots: &[usize]) -> Vec<usize> {
        let mask: usize = slots.iter().map(|&s| 1 << s).sum();
        (0..self.dim()).filter(|i| i & mask == 0).collect()
    }

    /// Offsets of the `2^k` local basis states, first slot most significant.
    fn offsets(slots: &[usize]) -> Vec<usize> {
        let k = slots.len();
        (0..1usize << k)
            .map(|t| {
                slots
                    .iter()
                    .enumerate()
                    .map(|(j, &s)| ((t >> (k - 1 - j)) & 1) << s)
                    .sum()
            })
            .collect()
    }

    /// `rho -> U rho U^dagger` with `u` acting on `qubits` (first qubit is the
    /// most significant bit of `u`'s index).
    pub fn apply_unitary(&mut self, u: &[Complex64], qubits: &[usize]) {
        let slots: Vec<usize> = qubits.iter().map(|&q| self.slot(q)).collect();
        let d = 1usize << slots.len();
        assert_eq!(u.len(), d * d, "matrix size does not match qubit count");
        let dim = self.dim();
        let bases = self.bases(&slots);
        let off = Self::offsets(&slots);
        let mut v = vec![ZERO; d];
        let m = &mut self.matrix;
        for col in 0..dim {
            for &b in &bases {
                for t in 0..d {
                    v[t] = m[(b + off[t]) * dim + col];
                }
                for t in 0..d {
                    let mut acc = ZERO;
                    for s in 0..d {
                        acc += u[t * d + s] * v[s];
                    }
                    m[(b + off[t]) * dim + col] = acc;
                }
            }
        }
        for row in 0..dim {
            let base_row = row * dim;
            for &b in &bases {
                for t in 0..d {
                    v[t] = m[base_row + b + off[t]];
                }
                for t in 0..d {
                    let mut acc = ZERO;
                    for s in 0..d {
                        acc += v[s] * u[t * d + s].conj();
                    }
                    m[base_row + b + off[t]] = acc;
                }
            }
        }
    }

    fn bit(&self, q: usize) -> usize {
        1 << self.slot(q)
    }

    /// Apply a unitary gate, with dedicated kernels for permutation,
    /// diagonal and single-qubit gates.
    pub fn apply_gate(&mut self, kind: &GateKind, qubits: &[usize]) {
        match kind {
            GateKind::X => {
                let b = self.bit(qubits[0]);
                self.permute(|i| i ^ b);
            }
            GateKind::Cx => {
                let (a, b) = (self.bit(qubits[0]), self.bit(qubits[1]));
                self.permute(|i| if i & a != 0 { i ^ b } else { i });
            }
            GateKind::Ccx => {
                let ab = self.bit(qubits[0]) | self.bit(qubits[1]);
                let t = self.bit(qubits[2]);
                self.permute(|i| if i & ab == ab { i ^ t } else { i });
            }
            GateKind::Z | GateKind::T | GateKind::Tdg | GateKind::Rz(_) => {
                let u = unitary_matrix(kind).expect("diagonal gate");
                let b = self.bit(qubits[0]);
                self.scale_entries(|i| if i & b != 0 { u[3] } else { u[0] });
            }
            GateKind::H | GateKind::Ry(_) => {
                let u = unitary_matrix(kind).expect("single-qubit gate");
                let b = self.bit(qubits[0]);
                self.single_qubit(b, &u);
            }
            _ => panic!("{} is not a unitary gate", kind.name()),
        }
    }

    /// Controlled-Z between two qubits.
    fn cz(&mut self, q0: usize, q1: usize) {
        let ab = self.bit(q0) | self.bit(q1);
        let minus = -Complex64::new(1.0, 0.0);
        self.scale_entries(|i| if i & ab == ab { minus } else { Complex64::new(1.0, 0.0) });
    }

    /// `rho[r][c] -> rho[f(r)][f(c)]` for an involution `f`.
    fn permute(&mut self, f: impl Fn(usize) -> usize) {
        let dim = self.dim();
        for r in 0..dim {
            let fr = f(r);
            for c in 0..dim {
                let (i, j) = (r * dim + c, fr * dim + f(c));
                if j > i {
                    self.matrix.swap(i, j);
                }
            }
        }
    }

    /// `rho[r][c] -> d(r) conj(d(c)) rho[r][c]`.
    fn scale_entries(&mut self, d: impl Fn(usize) -> Complex64) {
        let dim = self.dim();
        let phases: Vec<Complex64> = (0..dim).map(d).collect();
        for r in 0..dim {
            let row = &mut self.matrix[r * dim..(r + 1) * dim];
            for (x, p) in row.iter_mut().zip(&phases) {
                *x *= phases[r] * p.conj();
            }
        }
    }

    fn single_qubit(&mut self, b: usize, u: &[Complex64]) {
        let dim = self.dim();
        let m = &mut self.matrix;
        for r0 in (0..dim).filter(|r| r & b == 0) {
            let r1 = r0 | b;
            for c in 0..dim {
                let (x, y) = (m[r0 * dim + c], m[r1 * dim + c]);
                m[r0 * dim + c] = u[0] * x + u[1] * y;
                m[r1 * dim + c] = u[2] * x + u[3] * y;
            }
        }
        let uc: Vec<Complex64> = u.iter().map(|z| z.conj()).collect();
        for r in 0..dim {
            let row = &mut m[r * dim..(r + 1) * dim];
            for c0 in (0..dim).filter(|c| c & b == 0) {
                let (x, y) = (row[c0], row[c0 | b]);
                row[c0] = x * uc[0] + y * uc[1];
                row[c0 | b] = x * uc[2] + y * uc[3];
            }
        }
    }

    /// Depolarizing channel with error probability `p` on one or two qubits:
    /// with probability `p` a uniformly chosen non-identity Pauli is applied.
    ///
    /// Uses `sum_P P rho P = d * I (x) Tr_sub(rho)` over all `d^2` Paulis, so
    /// the channel is `(1 - l) rho + l * I/d (x) Tr_sub(rho)` with
    /// `l = p d^2 / (d^2 - 1)`.
    pub fn depolarize(&mut self, qubits: &[usize], p: f64) {
        assert!((1..=2).contains(&qubits.len()), "depolarizing acts on 1 or 2 qubits");
        if p == 0.0 {
            return;
        }
        let slots: Vec<usize> = qubits.iter().map(|&q| self.slot(q)).collect();
        let d = 1usize << slots.len();
        let d2 = (d * d) as f64;
        let lam = p * d2 / (d2 - 1.0);
        let keep = 1.0 - lam;
        let dim = self.dim();
        let bases = self.bases(&slots);
        let off = Self::offsets(&slots);
        let m = &mut self.matrix;
        for &r in &bases {
            for &c in &bases {
                let mut tr = ZERO;
                for t in 0..d {
                    tr += m[(r + off[t]) * dim + c + off[t]];
                }
                for i in 0..d {
                    for j in 0..d {
                        m[(r + off[i]) * dim + c + off[j]] *= keep;
                    }
                    m[(r + off[i]) * dim + c + off[i]] += tr * (lam / d as f64);
                }
            }
        }
    }

    /// Complete dephasing in the computational basis.
    pub fn dephase(&mut self, q: usize) {
        let bit = 1usize << self.slot(q);
        let dim = self.dim();
        for r in 0..dim {
            for c in 0..dim {
                if (r ^ c) & bit != 0 {
                    self.matrix[r * dim + c] = ZERO;
                }
            }
        }
    }

    /// Append `q` in `|0><0|` as the new most significant slot.
    pub fn add_qubit(&mut self, q: usize) {
        assert!(!self.contains(q), "qubit {} already present", q);
        let dim = self.dim();
        let new_dim = dim * 2;
        let mut m = vec![ZERO; new_dim * new_dim];
        for r in 0..dim {
            m[r * new_dim..r * new_dim + dim].copy_from_slice(&self.matrix[r * dim..(r + 1) * dim]);
        }
        self.matrix = m;
        self.qubits.push(q);
    }

    /// Partial trace over `q`.
    pub fn trace_out(&mut self, q: usize) {
        self.reduce(q, 1.0);
    }

    /// `Tr_q(Z_q rho)`: the operator left after measuring `Z` on `q`. The
    /// result is not a state, but every later channel on other qubits is
    /// linear, so the final trace still gives `<Z_q (x) O>`.
    pub fn contract_z(&mut self, q: usize) {
        self.reduce(q, -1.0);
    }

    fn reduce(&mut self, q: usize, one_weight: f64) {
        let s = self.slot(q);
        let dim = self.dim();
        let new_dim = dim / 2;
        let low = (1usize << s) - 1;
        let widen = |i: usize| ((i & !low) << 1) | (i & low);
        let mut m = vec![ZERO; new_dim * new_dim];
        for r in 0..new_dim {
            let r0 = widen(r);
            for c in 0..new_dim {
                let c0 = widen(c);
                m[r * new_dim + c] =
                    self.matrix[r0 * dim + c0] + self.matrix[(r0 | 1 << s) * dim + (c0 | 1 << s)] * one_weight;
            }
        }
        self.matrix = m;
        self.qubits.remove(s);
    }

    /// Outcome probabilities of measuring `qubits`; `qubits[j]` is bit `j`.
    /// Qubits not present in the state read 0.
    pub fn probabilities(&self, qubits: &[usize]) -> Vec<f64> {
        let dim = self.dim();
        let slots: Vec<Option<usize>> = qubits
            .iter()
            .map(|&q| self.qubits.iter().position(|&x| x == q))
            .collect();
        let mut probs = vec![0.0; 1 << qubits.len()];
        for i in 0..dim {
            let mut outcome = 0usize;
            for (j, s) in slots.iter().enumerate() {
                if let Some(s) = s {
                    outcome |= ((i >> s) & 1) << j;
                }
            }
            probs[outcome] += self.matrix[i * dim + i].re;
        }
        probs
    }

    pub fn expectation(&self, obs: &Observable) -> f64 {
        obs.expectation_from_probs(&self.probabilities(obs.qubits()))
    }

    /// `<Z>` on a single qubit.
    pub fn expectation_z(&self, q: usize) -> f64 {
        self.expectation(&Observable::ZParity(vec![q]))
    }

    /// `Tr(P rho)` for a Pauli string given as `(qubit, pauli index)` pairs
    /// (1 = X, 2 = Y, 3 = Z).
    pub fn expectation_pauli(&self, ops: &[(usize, usize)]) -> f64 {
        // left-multiply by P, then take the trace
        let mut tmp = self.clone();
        let dim = tmp.dim();
        for &(q, idx) in ops {
            let s = tmp.slot(q);
            let p = pauli(idx);
            let bit = 1usize << s;
            for col in 0..dim {
                for r in (0..dim).filter(|r| r & bit == 0) {
                    let (a, b) = (tmp.matrix[r * dim + col], tmp.matrix[(r | bit) * dim + col]);
                    tmp.matrix[r * dim + col] = p[0] * a + p[1] * b;
                    tmp.matrix[(r | bit) * dim + col] = p[2] * a + p[3] * b;
                }
            }
        }
        tmp.trace().re
    }
}

/// Functional form of [`DensityState::depolarize`].
pub fn apply_depolarizing(state: &DensityState, qubits: &[usize], p: f64) -> Result<DensityState, SimError> {
    if !(0.0..=1.0).contains(&p) {
        return Err(SimError::InvalidProbability(p));
    }
    let mut out = state.clone();
    out.depolarize(qubits, p);
    Ok(out)
}

/// Gate order with the same outcome as `c` but shorter qubit lifetimes.
///
/// Gates that share a qubit or classical bit keep their relative order (a
/// conditioned gate also depends on the qubit that wrote its bit), so the
/// result is the same channel. Among ready gates, those that bring no new
/// qubit into the state go first; otherwise the gate needed soonest (by
/// as-late-as-possible layer) is picked.
fn low_width_order(c: &Circuit) -> Vec<usize> {
    let gates = c.gates();
    let nq = c.num_qubits();
    let mut writer: Vec<Option<usize>> = vec![None; c.num_clbits()];
    let mut qubit_refs: Vec<Vec<usize>> = Vec::with_capacity(gates.len());
    let mut resources: Vec<Vec<usize>> = Vec::with_capacity(gates.len());
    for g in gates {
        let mut qs = g.qubits.clone();
        let mut res = g.qubits.clone();
        match g.kind {
            GateKind::Measure(cb) => {
                writer[cb] = Some(g.qubits[0]);
                res.push(nq + cb);
            }
            GateKind::Conditioned { clbit, .. } => {
                if let Some(src) = writer[clbit] {
                    qs.push(src);
                    res.push(src);
                }
                res.push(nq + clbit);
            }
            _ => {}
        }
        qubit_refs.push(qs);
        resources.push(res);
    }

    let mut last: Vec<Option<usize>> = vec![None; nq + c.num_clbits()];
    let mut succs: Vec<Vec<usize>> = vec![Vec::new(); gates.len()];
    let mut indeg = vec![0usize; gates.len()];
    for (i, res) in resources.iter().enumerate() {
        for &r in res {
            if let Some(p) = last[r] {
                if !succs[p].contains(&i) {
                    succs[p].push(i);
                    indeg[i] += 1;
                }
            }
            last[r] = Some(i);
        }
    }
    let mut alap = vec![0i64; gates.len()];
    for i in (0..gates.len()).rev() {
        if let Some(m) = succs[i].iter().map(|&s| alap[s]).min() {
            alap[i] = m - 1;
        }
    }

    let mut remaining = vec![0usize; nq];
    for qs in &qubit_refs {
        for &q in qs {
            remaining[q] += 1;
        }
    }
    let mut live = vec![false; nq];
    let mut ready: Vec<usize> = (0..gates.len()).filter(|&i| indeg[i] == 0).collect();
    let mut order = Vec::with_capacity(gates.len());
    while !ready.is_empty() {
        let opens = |i: usize| {
            if gates[i].kind == GateKind::Reset {
                0
            } else {
                qubit_refs[i].iter().filter(|&&q| !live[q]).count()
            }
        };
        let pos = (0..ready.len())
            .min_by_key(|&j| {
                let i = ready[j];
                let o = opens(i);
                (o > 0, if o > 0 { alap[i] } else { 0 }, i)
            })
            .expect("ready is non-empty");
        let i = ready.swap_remove(pos);
        order.push(i);
        for &q in &qubit_refs[i] {
            live[q] = gates[i].kind != GateKind::Reset;
            remaining[q] -= 1;
            if remaining[q] == 0 {
                live[q] = false;
            }
        }
        for &s in &succs[i] {
            indeg[s] -= 1;
            if indeg[s] == 0 {
                ready.push(s);
            }
        }
    }
    order
}

/// Per-gate liveness: which qubits leave the state after each gate, and
/// whether they are traced out or contracted with `Z`.
struct Plan {
    release_after: Vec<Vec<(usize, bool)>>,
    cond_source: Vec<Option<usize>>,
}

fn plan(gates: &[Gate], num_qubits: usize, num_clbits: usize, keep: &[usize], contract: &[usize]) -> Plan {
    let mut cond_source = vec![None; gates.len()];
    let mut writer: Vec<Option<usize>> = vec![None; num_clbits];
    for (i, g) in gates.iter().enumerate() {
        match g.kind {
            GateKind::Measure(cb) => writer[cb] = Some(g.qubits[0]),
            GateKind::Conditioned { clbit, .. } => cond_source[i] = writer[clbit],
            _ => {}
        }
    }
    let mut needed = vec![false; num_qubits];
    for &q in keep {
        needed[q] = true;
    }
    // contraction applies to a qubit's final lifetime only
    let mut final_segment = vec![true; num_qubits];
    let mut release_after = vec![Vec::new(); gates.len()];
    for (i, g) in gates.iter().enumerate().rev() {
        if g.kind == GateKind::Reset {
            needed[g.qubits[0]] = false;
            final_segment[g.qubits[0]] = false;
            continue;
        }
        let uses = g.qubits.iter().copied().chain(cond_source[i]);
        for q in uses {
            if !needed[q] {
                release_after[i].push((q, final_segment[q] && contract.contains(&q)));
                needed[q] = true;
            }
        }
    }
    Plan {
        release_after,
        cond_source,
    }
}

fn evolve(
    c: &Circuit,
    noise: &NoiseModel,
    keep: &[usize],
    contract: &[usize],
    max_qubits: usize,
) -> Result<DensityState, SimError> {
    if c.num_qubits() > max_qubits {
        return Err(SimError::Capacity {
            needed: c.num_qubits(),
            limit: max_qubits,
        });
    }
    if let Some(&q) = keep.iter().chain(contract).find(|&&q| q >= c.num_qubits()) {
        return Err(SimError::ObservableOutOfRange(q));
    }
    let order = low_width_order(c);
    let gates: Vec<Gate> = order.iter().map(|&i| c.gates()[i].clone()).collect();
    let plan = plan(&gates, c.num_qubits(), c.num_clbits(), keep, contract);
    let mut state = DensityState::empty();
    // per qubit: number of gates applied so far, to detect feed-forward from
    // a qubit that changed after it was measured
    let mut version = vec![0usize; c.num_qubits()];
    let mut measured: Vec<Option<(usize, usize)>> = vec![None; c.num_clbits()];

    for (i, g) in gates.iter().enumerate() {
        if g.kind == GateKind::Reset {
            let q = g.qubits[0];
            if state.contains(q) {
                state.trace_out(q);
            }
            version[q] += 1;
            continue;
        }
        for &q in &g.qubits {
            if !state.contains(q) {
                state.add_qubit(q);
            }
        }
        match g.kind {
            GateKind::Measure(cb) => {
                let q = g.qubits[0];
                state.dephase(q);
                version[q] += 1;
                measured[cb] = Some((q, version[q]));
            }
            GateKind::Conditioned { pauli, clbit } => {
                if let Some((src, ver)) = measured[clbit] {
                    debug_assert_eq!(plan.cond_source[i], Some(src));
                    if version[src] != ver {
                        return Err(SimError::UnsupportedFeedForward {
                            gate: order[i],
                            clbit,
                            qubit: src,
                        });
                    }
                    match pauli {
                        CondPauli::X => state.apply_gate(&GateKind::Cx, &[src, g.qubits[0]]),
                        CondPauli::Z => state.cz(src, g.qubits[0]),
                    }
                }
                version[g.qubits[0]] += 1;
            }
            kind => {
                state.apply_gate(&kind, &g.qubits);
                let p = noise.p_for(g.is_comm());
                if p > 0.0 {
                    if g.qubits.len() > 2 {
                        return Err(SimError::UnsupportedNoise(g.qubits.len()));
                    }
                    state.depolarize(&g.qubits, p);
                }
                for &q in &g.qubits {
                    version[q] += 1;
                }
            }
        }
        for &(q, contract) in &plan.release_after[i] {
            if state.contains(q) {
                if contract {
                    state.contract_z(q);
                } else {
                    state.trace_out(q);
                }
            }
        }
    }
    for &q in keep {
        if !state.contains(q) {
            state.add_qubit(q);
        }
    }
    let extra: Vec<usize> = state.qubits().iter().copied().filter(|q| !keep.contains(q)).collect();
    for q in extra {
        state.trace_out(q);
    }
    Ok(state)
}

/// Evolve `c` under `noise` and return the final state reduced to `keep`.
pub fn simulate_exact(
    c: &Circuit,
    noise: &NoiseModel,
    keep: &[usize],
    max_qubits: usize,
) -> Result<DensityState, SimError> {
    evolve(c, noise, keep, &[], max_qubits)
}

/// `Tr(O rho)` at the end of `c`.
///
/// For a Z-parity observable each readout qubit is contracted with `Z` as
/// soon as it is no longer used, which keeps the live state small.
pub fn simulate_exact_expectation(
    c: &Circuit,
    noise: &NoiseModel,
    obs: &Observable,
    max_qubits: usize,
) -> Result<f64, SimError> {
    match obs {
        Observable::ZParity(qs) if qs.iter().collect::<BTreeSet<_>>().len() == qs.len() => {
            Ok(evolve(c, noise, &[], qs, max_qubits)?.trace().re)
        }
        _ => Ok(evolve(c, noise, obs.qubits(), &[], max_qubits)?.expectation(obs)),
    }
}
