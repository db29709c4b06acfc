//! Zero-noise extrapolation: unitary folding and linear extrapolation.
//!
//! Global ZNE folds the monolithic circuit and then lowers it; Local ZNE
//! lowers first and folds each partition's local gates. In both cases the
//! gates that become communication primitives are never folded.

use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::circuit::{Circuit, CircuitError, Gate, GateKind};
use crate::distribute::{local_subcircuit_depths, lower, CommScope, DistributeError, DistributedCircuit, LoweringMode};
use crate::partition::Assignment;
use crate::sim::{simulate_exact_expectation, simulate_shots, Backend, NoiseModel, Observable, SimError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ZneError {
    #[error("scale factor {0} must be a finite number >= 1")]
    InvalidScale(f64),
    #[error("scale schedule must start at 1.0 and strictly increase: {0:?}")]
    InvalidSchedule(Vec<f64>),
    #[error("circuit has no foldable unitary gates")]
    NothingToFold,
    #[error("extrapolation needs at least two points")]
    TooFewPoints,
    #[error("all scale factors are identical; the fit is degenerate")]
    DegenerateFit,
    #[error(transparent)]
    Circuit(#[from] CircuitError),
    #[error(transparent)]
    Distribute(#[from] DistributeError),
    #[error(transparent)]
    Sim(#[from] SimError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    /// Fold the whole circuit, then partition and lower it.
    Global,
    /// Lower first, then fold each partition's local gates.
    Local,
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Strategy::Global => "global",
            Strategy::Local => "local",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScaleSchedule {
    factors: Vec<f64>,
}

impl ScaleSchedule {
    pub fn new(factors: Vec<f64>) -> Result<Self, ZneError> {
        let increasing = factors.windows(2).all(|w| w[0] < w[1]);
        if factors.first() != Some(&1.0) || !increasing || factors.iter().any(|f| !f.is_finite()) {
            return Err(ZneError::InvalidSchedule(factors));
        }
        Ok(ScaleSchedule { factors })
    }

    pub fn factors(&self) -> &[f64] {
        &self.factors
    }

    pub fn max(&self) -> f64 {
        *self.factors.last().expect("schedule is non-empty")
    }
}

impl Default for ScaleSchedule {
    fn default() -> Self {
        ScaleSchedule {
            factors: vec![1.0, 1.5, 2.0, 2.5, 3.0],
        }
    }
}

fn check_scale(lambda: f64) -> Result<(), ZneError> {
    if lambda.is_finite() && lambda >= 1.0 {
        Ok(())
    } else {
        Err(ZneError::InvalidScale(lambda))
    }
}

/// Number of extra `(g^dagger, g)` pairs for scale `lambda` over `l` gates.
pub fn fold_pairs(lambda: f64, l: usize) -> usize {
    ((lambda - 1.0) * l as f64 / 2.0).round() as usize
}

/// Global unitary folding of every unitary gate.
///
/// With `L` unitary gates and `k = round((lambda - 1) L / 2)`, the circuit is
/// followed by `k / L` copies of `C^dagger C` and the last `k mod L` unitary
/// gates are folded in place as `g g^dagger g`. Trailing measurements stay
/// at the end.
pub fn fold_global(c: &Circuit, lambda: f64) -> Result<Circuit, ZneError> {
    fold_global_protected(c, lambda, |_, _| false)
}

/// [`fold_global`] that leaves the gates selected by `protect` (and all
/// non-unitary gates) out of every inserted copy.
///
/// Dropping a gate from both halves of `C^dagger C` keeps the inserted block
/// equal to the identity, so the folded circuit still implements `C`.
pub fn fold_global_protected<F>(c: &Circuit, lambda: f64, protect: F) -> Result<Circuit, ZneError>
where
    F: Fn(usize, &Gate) -> bool,
{
    check_scale(lambda)?;
    let gates = c.gates();
    let body_len = gates.len()
        - gates
            .iter()
            .rev()
            .take_while(|g| matches!(g.kind, GateKind::Measure(_)))
            .count();
    let (body, tail) = gates.split_at(body_len);
    let foldable: Vec<&Gate> = body
        .iter()
        .enumerate()
        .filter(|(i, g)| g.is_unitary() && !protect(*i, g))
        .map(|(_, g)| g)
        .collect();
    let l = foldable.len();
    if l == 0 {
        return Err(ZneError::NothingToFold);
    }
    let k = fold_pairs(lambda, l);
    let (whole, rest) = (k / l, k % l);

    let mut seq: Vec<(Gate, bool)> = body
        .iter()
        .enumerate()
        .map(|(i, g)| (g.clone(), g.is_unitary() && !protect(i, g)))
        .collect();
    for _ in 0..whole {
        for g in foldable.iter().rev() {
            seq.push((g.adjoint()?, true));
        }
        for g in &foldable {
            seq.push(((*g).clone(), true));
        }
    }

    let mut remaining = rest;
    let mut fold_here = vec![false; seq.len()];
    for (i, (_, ok)) in seq.iter().enumerate().rev() {
        if remaining == 0 {
            break;
        }
        if *ok {
            fold_here[i] = true;
            remaining -= 1;
        }
    }

    let mut out = c.empty_like();
    for ((g, _), fold) in seq.into_iter().zip(fold_here) {
        if fold {
            out.push(g.clone())?;
            out.push(g.adjoint()?)?;
        }
        out.push(g)?;
    }
    out.extend(tail.iter().cloned())?;
    Ok(out)
}

/// Local folding of a lowered circuit.
///
/// Each partition's local unitary gates (not comm-tagged, acting only on that
/// partition) are folded in place: with `L_p` such gates and
/// `k = round((lambda - 1) L_p / 2)`, every gate gets `k / L_p` folds and the
/// last `k mod L_p` gates get one more. Comm, measure, reset and conditioned
/// gates are never folded and keep their relative order.
pub fn fold_local(d: &DistributedCircuit, lambda: f64) -> Result<DistributedCircuit, ZneError> {
    check_scale(lambda)?;
    let gates = d.circuit.gates();
    let part: Vec<Option<usize>> = gates
        .iter()
        .map(|g| {
            if g.is_unitary() && !g.is_comm() {
                d.partition_of_gate(g)
            } else {
                None
            }
        })
        .collect();
    let mut folds = vec![0usize; gates.len()];
    for p in 0..d.k() {
        let members: Vec<usize> = (0..gates.len()).filter(|&i| part[i] == Some(p)).collect();
        let l = members.len();
        if l == 0 {
            continue;
        }
        let k = fold_pairs(lambda, l);
        for (pos, &i) in members.iter().enumerate() {
            folds[i] = k / l + usize::from(pos >= l - k % l);
        }
    }
    let mut out = Vec::with_capacity(gates.len());
    for (g, &f) in gates.iter().zip(&folds) {
        out.push(g.clone());
        if f > 0 {
            let inv = g.adjoint()?;
            for _ in 0..f {
                out.push(inv.clone());
                out.push(g.clone());
            }
        }
    }
    Ok(d.with_gates(out)?)
}

/// Ordinary least-squares line through `(scale, value)` points, evaluated at
/// scale 0.
pub fn extrapolate_linear(points: &[(f64, f64)]) -> Result<f64, ZneError> {
    if points.len() < 2 {
        return Err(ZneError::TooFewPoints);
    }
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(ZneError::DegenerateFit);
    }
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    Ok(my - slope * mx)
}

/// How a distributed circuit is turned into an expectation value.
#[derive(Debug, Clone)]
pub struct Evaluator {
    pub noise: NoiseModel,
    /// Observable over original qubit indices; it is relocated to each
    /// lowered circuit's readout qubits.
    pub observable: Observable,
    pub backend: Backend,
    pub shots: usize,
    pub seed: u64,
    pub max_qubits: usize,
}

impl Evaluator {
    pub fn evaluate(&self, d: &DistributedCircuit, stream: u64) -> Result<f64, SimError> {
        let obs = self
            .observable
            .relocated(self.observable.qubits().iter().map(|&q| d.readout[q]).collect());
        match self.backend {
            Backend::Exact => simulate_exact_expectation(&d.circuit, &self.noise, &obs, self.max_qubits),
            Backend::Shots => {
                let seed = self.seed ^ stream.wrapping_mul(0x9e37_79b9_7f4a_7c15);
                let r = simulate_shots(&d.circuit, &self.noise, obs.qubits(), self.shots, seed, self.max_qubits)?;
                Ok(r.estimate(&obs))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScalePoint {
    pub factor: f64,
    pub expectation: f64,
    /// Depth of the executed distributed circuit.
    pub depth: usize,
    /// Largest depth of a partition's local sub-circuit.
    pub local_depth_max: usize,
    pub comm_gates: usize,
    pub teleports: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MitigationResult {
    pub strategy: Strategy,
    pub per_scale: Vec<ScalePoint>,
    pub zero_noise_estimate: f64,
}

/// Gates of `c` that `a` places across partitions.
pub fn is_cut(a: &Assignment, g: &Gate) -> bool {
    g.is_unitary() && g.qubits.len() > 1 && g.qubits.iter().any(|&q| a.part_of(q) != a.part_of(g.qubits[0]))
}

/// The distributed circuit executed at scale `lambda` under `strategy`.
pub fn scaled_circuit(
    strategy: Strategy,
    c: &Circuit,
    a: &Assignment,
    lambda: f64,
    mode: LoweringMode,
    scope: CommScope,
) -> Result<DistributedCircuit, ZneError> {
    match strategy {
        Strategy::Global => {
            let folded = fold_global_protected(c, lambda, |_, g| is_cut(a, g))?;
            Ok(lower(&folded, a, mode, scope)?)
        }
        Strategy::Local => fold_local(&lower(c, a, mode, scope)?, lambda),
    }
}

/// Run every scale of the schedule and extrapolate to zero noise.
pub fn mitigate(
    strategy: Strategy,
    c: &Circuit,
    a: &Assignment,
    schedule: &ScaleSchedule,
    mode: LoweringMode,
    scope: CommScope,
    eval: &Evaluator,
) -> Result<MitigationResult, ZneError> {
    let per_scale = schedule
        .factors()
        .par_iter()
        .enumerate()
        .map(|(i, &lambda)| {
            let d = scaled_circuit(strategy, c, a, lambda, mode, scope)?;
            let expectation = eval.evaluate(&d, i as u64 + 1)?;
            Ok(ScalePoint {
                factor: lambda,
                expectation,
                depth: d.circuit.depth(),
                local_depth_max: local_subcircuit_depths(&d).into_iter().max().unwrap_or(0),
                comm_gates: d.comm_gate_indices.len(),
                teleports: d.teleports,
            })
        })
        .collect::<Result<Vec<_>, ZneError>>()?;
    let points: Vec<(f64, f64)> = per_scale.iter().map(|s| (s.factor, s.expectation)).collect();
    Ok(MitigationResult {
        strategy,
        zero_noise_estimate: extrapolate_linear(&points)?,
        per_scale,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::{generate_benchmark, Benchmark, DjOracle};

    fn ghz(n: usize) -> Circuit {
        generate_benchmark(Benchmark::Ghz, n, DjOracle::Balanced).unwrap()
    }

    #[test]
    fn fold_global_counts() {
        let c = ghz(4);
        assert_eq!(fold_global(&c, 1.0).unwrap(), c);
        assert_eq!(fold_global(&c, 3.0).unwrap().unitary_count(), 12);
        assert_eq!(fold_global(&c, 1.5).unwrap().unitary_count(), 6);
        assert_eq!(fold_global(&c, 5.0).unwrap().unitary_count(), 20);
        assert!(matches!(fold_global(&c, 0.5), Err(ZneError::InvalidScale(_))));
        assert_eq!(fold_global(&Circuit::new(2, 0), 2.0), Err(ZneError::NothingToFold));
    }

    #[test]
    fn fold_global_keeps_measurements_terminal() {
        let c = generate_benchmark(Benchmark::Dj, 3, DjOracle::Balanced).unwrap();
        let f = fold_global(&c, 2.0).unwrap();
        let first_measure = f.gates().iter().position(|g| !g.is_unitary()).unwrap();
        assert!(f.gates()[first_measure..].iter().all(|g| !g.is_unitary()));
        assert_eq!(f.len() - first_measure, 3);
    }

    #[test]
    fn protected_gates_are_not_copied() {
        let c = ghz(4);
        let a = Assignment::new(vec![0, 0, 1, 1], 2).unwrap();
        let f = fold_global_protected(&c, 3.0, |_, g| is_cut(&a, g)).unwrap();
        assert_eq!(f.gates().iter().filter(|g| is_cut(&a, g)).count(), 1);
        assert_eq!(f.unitary_count(), 4 + 2 * 3);
    }

    #[test]
    fn extrapolation_cases() {
        let v = extrapolate_linear(&[(1.0, 0.9), (2.0, 0.8), (3.0, 0.7)]).unwrap();
        assert!((v - 1.0).abs() < 1e-12);
        let v = extrapolate_linear(&[(1.0, 0.42), (2.0, 0.42), (3.0, 0.42)]).unwrap();
        assert!((v - 0.42).abs() < 1e-15);
        let v = extrapolate_linear(&[(1.0, 1.0), (2.0, 0.0), (3.0, 0.0)]).unwrap();
        assert!((v - 4.0 / 3.0).abs() < 1e-12);
        assert_eq!(
            extrapolate_linear(&[(2.0, 1.0), (2.0, 0.5)]),
            Err(ZneError::DegenerateFit)
        );
        assert_eq!(extrapolate_linear(&[(2.0, 1.0)]), Err(ZneError::TooFewPoints));
    }

    #[test]
    fn schedule_validation() {
        assert_eq!(ScaleSchedule::default().factors(), &[1.0, 1.5, 2.0, 2.5, 3.0]);
        assert!(ScaleSchedule::new(vec![1.0, 1.0]).is_err());
        assert!(ScaleSchedule::new(vec![1.5, 2.0]).is_err());
        assert!(ScaleSchedule::new(vec![]).is_err());
        assert!(ScaleSchedule::new(vec![1.0, 3.0]).is_ok());
    }

    #[test]
    fn fold_local_triples_each_partition() {
        let a = Assignment::new(vec![0, 0, 1, 1], 2).unwrap();
        let d = lower(&ghz(4), &a, LoweringMode::Roundtrip, CommScope::BellOnly).unwrap();
        assert_eq!(fold_local(&d, 1.0).unwrap(), d);
        let f = fold_local(&d, 3.0).unwrap();
        assert_eq!(f.comm_gate_indices.len(), d.comm_gate_indices.len());
        for p in 0..2 {
            let count = |x: &DistributedCircuit| {
                x.circuit
                    .gates()
                    .iter()
                    .filter(|g| g.is_unitary() && !g.is_comm() && x.partition_of_gate(g) == Some(p))
                    .count()
            };
            assert_eq!(count(&f), 3 * count(&d));
        }
        let before = local_subcircuit_depths(&d);
        let after = local_subcircuit_depths(&f);
        for (b, a) in before.iter().zip(&after) {
            assert_eq!(*a, 3 * b);
        }
    }
}
