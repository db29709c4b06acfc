//! Statevector trajectory sampling.
//!
//! Each shot evolves a pure state: after every noisy gate a non-identity
//! Pauli is applied with probability `p`, measurements collapse by the Born
//! rule and conditioned gates read the recorded bits. Shot `i` draws from its
//! own ChaCha stream `(seed, i)`, so results do not depend on scheduling.

use std::collections::BTreeMap;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::gates::unitary_matrix;
use super::{NoiseModel, Observable, SimError};
use crate::circuit::{Circuit, CondPauli, GateKind};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ShotResult {
    /// Outcome bitstrings, first readout qubit leftmost.
    pub counts: BTreeMap<String, usize>,
    pub shots: usize,
    pub seed: u64,
}

impl ShotResult {
    /// Sample mean of the observable. Bit `j` of an outcome index is
    /// character `j` of the bitstring.
    pub fn estimate(&self, obs: &Observable) -> f64 {
        let total: f64 = self
            .counts
            .iter()
            .map(|(bits, &n)| {
                let outcome = bits
                    .bytes()
                    .enumerate()
                    .fold(0u64, |acc, (j, b)| acc | (u64::from(b == b'1') << j));
                obs.eval_outcome(outcome) * n as f64
            })
            .sum();
        total / self.shots as f64
    }
}

struct StateVector {
    amps: Vec<Complex64>,
}

impl StateVector {
    fn new(n: usize) -> Self {
        let mut amps = vec![ZERO; 1 << n];
        amps[0] = Complex64::new(1.0, 0.0);
        StateVector { amps }
    }

    fn apply(&mut self, u: &[Complex64], qubits: &[usize]) {
        let k = qubits.len();
        let d = 1usize << k;
        let mask: usize = qubits.iter().map(|&q| 1 << q).sum();
        let off: Vec<usize> = (0..d)
            .map(|t| {
                qubits
                    .iter()
                    .enumerate()
                    .map(|(j, &q)| ((t >> (k - 1 - j)) & 1) << q)
                    .sum()
            })
            .collect();
        let mut v = vec![ZERO; d];
        for b in (0..self.amps.len()).filter(|i| i & mask == 0) {
            for t in 0..d {
                v[t] = self.amps[b + off[t]];
            }
            for t in 0..d {
                let mut acc = ZERO;
                for s in 0..d {
                    acc += u[t * d + s] * v[s];
                }
                self.amps[b + off[t]] = acc;
            }
        }
    }

    fn pauli_x(&mut self, q: usize) {
        let bit = 1 << q;
        for i in (0..self.amps.len()).filter(|i| i & bit == 0) {
            self.amps.swap(i, i | bit);
        }
    }

    fn pauli_z(&mut self, q: usize) {
        let bit = 1 << q;
        for (i, a) in self.amps.iter_mut().enumerate() {
            if i & bit != 0 {
                *a = -*a;
            }
        }
    }

    /// Pauli by index (1 = X, 2 = Y, 3 = Z); Y is applied as i·X·Z, and the
    /// global phase is dropped.
    fn pauli(&mut self, q: usize, idx: usize) {
        match idx {
            0 => {}
            1 => self.pauli_x(q),
            2 => {
                self.pauli_z(q);
                self.pauli_x(q);
            }
            3 => self.pauli_z(q),
            _ => unreachable!(),
        }
    }

    fn prob_one(&self, q: usize) -> f64 {
        let bit = 1 << q;
        self.amps
            .iter()
            .enumerate()
            .filter(|(i, _)| i & bit != 0)
            .map(|(_, a)| a.norm_sqr())
            .sum()
    }

    fn collapse(&mut self, q: usize, outcome: bool, prob: f64) {
        let bit = 1 << q;
        let scale = 1.0 / prob.sqrt();
        for (i, a) in self.amps.iter_mut().enumerate() {
            if ((i & bit) != 0) == outcome {
                *a *= scale;
            } else {
                *a = ZERO;
            }
        }
    }

    fn measure(&mut self, q: usize, rng: &mut ChaCha8Rng) -> bool {
        let p1 = self.prob_one(q).clamp(0.0, 1.0);
        let one = rng.gen::<f64>() < p1;
        self.collapse(q, one, if one { p1 } else { 1.0 - p1 });
        one
    }

    fn sample(&self, rng: &mut ChaCha8Rng) -> usize {
        let r: f64 = rng.gen();
        let mut acc = 0.0;
        for (i, a) in self.amps.iter().enumerate() {
            acc += a.norm_sqr();
            if r < acc {
                return i;
            }
        }
        // rounding left r above the accumulated total
        self.amps.iter().rposition(|a| a.norm_sqr() > 0.0).unwrap_or(0)
    }
}

fn run_shot(c: &Circuit, noise: &NoiseModel, readout: &[usize], rng: &mut ChaCha8Rng) -> String {
    let mut psi = StateVector::new(c.num_qubits());
    let mut bits = vec![false; c.num_clbits()];
    for g in c.gates() {
        match g.kind {
            GateKind::Measure(cb) => bits[cb] = psi.measure(g.qubits[0], rng),
            GateKind::Reset => {
                if psi.measure(g.qubits[0], rng) {
                    psi.pauli_x(g.qubits[0]);
                }
            }
            GateKind::Conditioned { pauli, clbit } => {
                if bits[clbit] {
                    match pauli {
                        CondPauli::X => psi.pauli_x(g.qubits[0]),
                        CondPauli::Z => psi.pauli_z(g.qubits[0]),
                    }
                }
            }
            kind => {
                let u = unitary_matrix(&kind).expect("remaining kinds are unitary");
                psi.apply(&u, &g.qubits);
                let p = noise.p_for(g.is_comm());
                if p > 0.0 && rng.gen::<f64>() < p {
                    let nq = g.qubits.len();
                    // uniform over the 4^nq - 1 non-identity Pauli strings
                    let choice = rng.gen_range(1..(1usize << (2 * nq)));
                    for (j, &q) in g.qubits.iter().enumerate() {
                        psi.pauli(q, (choice >> (2 * j)) & 3);
                    }
                }
            }
        }
    }
    let idx = psi.sample(rng);
    readout
        .iter()
        .map(|&q| if idx >> q & 1 == 1 { '1' } else { '0' })
        .collect()
}

/// Noiseless outcome distribution of `qubits` for a unitary circuit whose
/// only non-unitary gates are terminal measurements. Outcome bit `j` is
/// `qubits[j]`.
pub fn ideal_probabilities(c: &Circuit, qubits: &[usize], max_qubits: usize) -> Result<Vec<f64>, SimError> {
    if c.num_qubits() > max_qubits {
        return Err(SimError::Capacity {
            needed: c.num_qubits(),
            limit: max_qubits,
        });
    }
    if let Some(&q) = qubits.iter().find(|&&q| q >= c.num_qubits()) {
        return Err(SimError::ObservableOutOfRange(q));
    }
    let mut psi = StateVector::new(c.num_qubits());
    let mut measured = vec![false; c.num_qubits()];
    for (i, g) in c.gates().iter().enumerate() {
        match &g.kind {
            GateKind::Measure(_) => measured[g.qubits[0]] = true,
            kind => {
                let u = unitary_matrix(kind).ok_or(SimError::NotUnitary(i))?;
                if g.qubits.iter().any(|&q| measured[q]) {
                    return Err(SimError::NotUnitary(i));
                }
                psi.apply(&u, &g.qubits);
            }
        }
    }
    let mut probs = vec![0.0; 1 << qubits.len()];
    for (idx, a) in psi.amps.iter().enumerate() {
        let outcome = qubits
            .iter()
            .enumerate()
            .fold(0usize, |acc, (j, &q)| acc | ((idx >> q & 1) << j));
        probs[outcome] += a.norm_sqr();
    }
    Ok(probs)
}

/// Sample `shots` trajectories of `c`, reading out `readout` at the end.
pub fn simulate_shots(
    c: &Circuit,
    noise: &NoiseModel,
    readout: &[usize],
    shots: usize,
    seed: u64,
    max_qubits: usize,
) -> Result<ShotResult, SimError> {
    if shots == 0 {
        return Err(SimError::NoShots);
    }
    if c.num_qubits() > max_qubits {
        return Err(SimError::Capacity {
            needed: c.num_qubits(),
            limit: max_qubits,
        });
    }
    if let Some(&q) = readout.iter().find(|&&q| q >= c.num_qubits()) {
        return Err(SimError::ObservableOutOfRange(q));
    }
    if noise.p_local > 0.0 || noise.p_comm() > 0.0 {
        if let Some(g) = c.gates().iter().find(|g| g.is_unitary() && g.qubits.len() > 2) {
            return Err(SimError::UnsupportedNoise(g.qubits.len()));
        }
    }
    let outcomes: Vec<String> = (0..shots)
        .into_par_iter()
        .map(|shot| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(shot as u64);
            run_shot(c, noise, readout, &mut rng)
        })
        .collect();
    let mut counts = BTreeMap::new();
    for o in outcomes {
        *counts.entry(o).or_insert(0) += 1;
    }
    Ok(ShotResult { counts, shots, seed })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::{generate_benchmark, Benchmark, DjOracle, Gate};

    #[test]
    fn noiseless_bell_support() {
        let c = generate_benchmark(Benchmark::Ghz, 2, DjOracle::Balanced).unwrap();
        let r = simulate_shots(&c, &NoiseModel::noiseless(), &[0, 1], 200, 7, 24).unwrap();
        assert_eq!(r.counts.values().sum::<usize>(), 200);
        assert!(r.counts.keys().all(|k| k == "00" || k == "11"));
    }

    #[test]
    fn x_then_measure_reads_one() {
        let mut c = Circuit::new(1, 1);
        c.extend([Gate::x(0), Gate::measure(0, 0)]).unwrap();
        for seed in 0..3 {
            let r = simulate_shots(&c, &NoiseModel::noiseless(), &[0], 50, seed, 24).unwrap();
            assert_eq!(r.counts.get("1"), Some(&50));
        }
    }

    #[test]
    fn deterministic_per_seed() {
        let c = generate_benchmark(Benchmark::W, 3, DjOracle::Balanced).unwrap();
        let noise = NoiseModel::new(0.05, 1.0).unwrap();
        let a = simulate_shots(&c, &noise, &[0, 1, 2], 300, 11, 24).unwrap();
        let b = simulate_shots(&c, &noise, &[0, 1, 2], 300, 11, 24).unwrap();
        assert_eq!(a, b);
        assert_eq!(simulate_shots(&c, &noise, &[0], 0, 1, 24), Err(SimError::NoShots));
    }

    #[test]
    fn ideal_ghz_distribution() {
        let c = generate_benchmark(Benchmark::Ghz, 3, DjOracle::Balanced).unwrap();
        let p = ideal_probabilities(&c, &[0, 1, 2], 24).unwrap();
        assert!((p[0] - 0.5).abs() < 1e-12 && (p[7] - 0.5).abs() < 1e-12);
        let mut r = Circuit::new(1, 1);
        r.extend([Gate::measure(0, 0), Gate::h(0)]).unwrap();
        assert_eq!(ideal_probabilities(&r, &[0], 24), Err(SimError::NotUnitary(1)));
    }

    #[test]
    fn reset_returns_to_zero() {
        let mut c = Circuit::new(1, 0);
        c.extend([Gate::h(0), Gate::reset(0)]).unwrap();
        let r = simulate_shots(&c, &NoiseModel::noiseless(), &[0], 64, 3, 24).unwrap();
        assert_eq!(r.counts.get("0"), Some(&64));
    }
}
