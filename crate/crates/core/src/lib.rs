//! Simulation and experiment harness for zero-noise extrapolation on
//! distributed (partitioned) quantum circuits.
//!
//! Pipeline: [`circuit`] benchmarks and IR, [`partition`] qubit assignment,
//! [`distribute`] teleportation lowering, [`sim`] noisy simulation, [`zne`]
//! folding and extrapolation, [`harness`] experiments, sweeps and metrics.

pub mod circuit;
pub mod distribute;
pub mod harness;
pub mod partition;
pub mod qasm;
pub mod sim;
pub mod zne;

pub use circuit::{Benchmark, Circuit, CircuitError, CondPauli, DjOracle, Gate, GateKind, Tag};
