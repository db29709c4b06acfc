//! Noisy circuit simulation.
//!
//! Two backends share one noise model: every unitary gate is followed by a
//! depolarizing channel on its qubits, at `p_local` or, for comm-tagged gates,
//! at `p_comm = alpha * p_local` (clamped to 1). Measure, reset and
//! conditioned gates are noiseless.
//!
//! * [`density`]: exact density-matrix evolution. Measurement is complete
//!   dephasing; a conditioned correction is applied as the controlled Pauli
//!   from the measured qubit, which is exact as long as the measured qubit is
//!   untouched between the measurement and its last conditioned use.
//! * [`trajectory`]: statevector Monte Carlo with sampled Pauli errors and
//!   Born-rule measurement, one independent random stream per shot.

pub mod density;
pub mod gates;
pub mod trajectory;

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use density::{apply_depolarizing, simulate_exact, simulate_exact_expectation, DensityState};
pub use trajectory::{ideal_probabilities, simulate_shots, ShotResult};

/// Default qubit cap of the exact backend.
pub const EXACT_MAX_QUBITS: usize = 12;
/// Default qubit cap of the trajectory backend.
pub const TRAJECTORY_MAX_QUBITS: usize = 24;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("circuit needs {needed} qubits, backend limit is {limit}")]
    Capacity { needed: usize, limit: usize },
    #[error("probability {0} outside [0, 1]")]
    InvalidProbability(f64),
    #[error("noise multiplier {0} must be non-negative")]
    InvalidMultiplier(f64),
    #[error("noisy {0}-qubit gates are not supported")]
    UnsupportedNoise(usize),
    #[error("gate {gate}: classical bit {clbit} was measured from qubit {qubit}, which changed before it was read")]
    UnsupportedFeedForward { gate: usize, clbit: usize, qubit: usize },
    #[error("observable qubit {0} out of range")]
    ObservableOutOfRange(usize),
    #[error("gate {0} is not unitary or acts on a measured qubit")]
    NotUnitary(usize),
    #[error("shot count must be at least 1")]
    NoShots,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    pub p_local: f64,
    pub alpha: f64,
}

impl NoiseModel {
    pub fn new(p_local: f64, alpha: f64) -> Result<Self, SimError> {
        if !(0.0..=1.0).contains(&p_local) {
            return Err(SimError::InvalidProbability(p_local));
        }
        if !(alpha >= 0.0 && alpha.is_finite()) {
            return Err(SimError::InvalidMultiplier(alpha));
        }
        Ok(NoiseModel { p_local, alpha })
    }

    pub fn noiseless() -> Self {
        NoiseModel {
            p_local: 0.0,
            alpha: 1.0,
        }
    }

    pub fn p_comm(&self) -> f64 {
        (self.alpha * self.p_local).min(1.0)
    }

    /// Error probability for a gate with the given tag.
    pub fn p_for(&self, comm: bool) -> f64 {
        if comm {
            self.p_comm()
        } else {
            self.p_local
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Backend {
    #[default]
    Exact,
    Shots,
}

impl fmt::Display for Backend {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Backend::Exact => "exact",
            Backend::Shots => "shots",
        })
    }
}

/// Observable measured at the end of a circuit.
///
/// Outcome indices put `qubits[j]` at bit `j`.
#[derive(Debug, Clone, PartialEq)]
pub enum Observable {
    /// Product of Z over the qubits.
    ZParity(Vec<usize>),
    /// Probability that the qubits read one of the outcomes in `support`.
    Projector { qubits: Vec<usize>, support: BTreeSet<u64> },
}

impl Observable {
    pub fn qubits(&self) -> &[usize] {
        match self {
            Observable::ZParity(q) => q,
            Observable::Projector { qubits, .. } => qubits,
        }
    }

    /// Same observable read out from different physical qubits.
    pub fn relocated(&self, qubits: Vec<usize>) -> Observable {
        match self {
            Observable::ZParity(_) => Observable::ZParity(qubits),
            Observable::Projector { support, .. } => Observable::Projector {
                qubits,
                support: support.clone(),
            },
        }
    }

    /// Value of the observable on one outcome.
    pub fn eval_outcome(&self, outcome: u64) -> f64 {
        match self {
            Observable::ZParity(_) => {
                if outcome.count_ones().is_multiple_of(2) {
                    1.0
                } else {
                    -1.0
                }
            }
            Observable::Projector { support, .. } => {
                if support.contains(&outcome) {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }

    /// Expectation over a probability vector indexed by outcome.
    pub fn expectation_from_probs(&self, probs: &[f64]) -> f64 {
        probs
            .iter()
            .enumerate()
            .map(|(i, &p)| p * self.eval_outcome(i as u64))
            .sum()
    }
}

/// Outcomes with probability above `tol`.
pub fn support_of(probs: &[f64], tol: f64) -> BTreeSet<u64> {
    probs
        .iter()
        .enumerate()
        .filter(|(_, &p)| p > tol)
        .map(|(i, _)| i as u64)
        .collect()
}

/// Total-variation distance between two distributions over the same outcomes.
pub fn total_variation(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    0.5 * a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum::<f64>()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn noise_model_bounds() {
        assert!(NoiseModel::new(1.2, 1.0).is_err());
        assert!(NoiseModel::new(-0.1, 1.0).is_err());
        assert!(NoiseModel::new(0.1, -1.0).is_err());
        let m = NoiseModel::new(0.6, 2.0).unwrap();
        assert_eq!(m.p_comm(), 1.0);
        let m = NoiseModel::new(0.01, 1.2).unwrap();
        assert!((m.p_comm() - 0.012).abs() < 1e-15);
        assert_eq!(m.p_for(false), 0.01);
    }

    #[test]
    fn observable_outcomes() {
        let z = Observable::ZParity(vec![0, 1]);
        assert_eq!(z.eval_outcome(0b11), 1.0);
        assert_eq!(z.eval_outcome(0b01), -1.0);
        let p = Observable::Projector {
            qubits: vec![0, 1],
            support: [0, 3].into_iter().collect(),
        };
        assert_eq!(p.expectation_from_probs(&[0.4, 0.1, 0.1, 0.4]), 0.8);
        assert_eq!(total_variation(&[0.5, 0.5], &[1.0, 0.0]), 0.5);
    }
}
