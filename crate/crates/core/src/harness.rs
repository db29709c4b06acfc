//! Experiments, sweeps, metrics and aggregation.
//!
//! An experiment compares three expectation values of one observable: the
//! noiseless monolithic circuit (ideal), the noisy lowered circuit without
//! mitigation (baseline) and the ZNE estimate. Errors are absolute
//! deviations from the ideal value.

use std::collections::BTreeMap;
use std::fmt;
use std::io;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::circuit::{generate_benchmark, Benchmark, CircuitError, DjOracle};
use crate::distribute::{distributed_stats, local_subcircuit_depths, lower, CommScope, DistributeError, LoweringMode};
use crate::partition::{cut_edges, partition_circuit, PartitionError};
use crate::sim::{
    ideal_probabilities, support_of, Backend, NoiseModel, Observable, SimError, EXACT_MAX_QUBITS, TRAJECTORY_MAX_QUBITS,
};
use crate::zne::{mitigate, Evaluator, ScaleSchedule, Strategy, ZneError};

/// Baselines with an error below this are excluded from error-reduction
/// aggregates.
pub const EXCLUSION_THRESHOLD: f64 = 0.03;
pub const DEFAULT_TRIM: f64 = 0.1;
const SUPPORT_TOL: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("invalid config: {0}")]
    Config(String),
    #[error("config parse error: {0}")]
    Toml(#[from] toml::de::Error),
    #[error(transparent)]
    Circuit(#[from] CircuitError),
    #[error(transparent)]
    Partition(#[from] PartitionError),
    #[error(transparent)]
    Distribute(#[from] DistributeError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Zne(#[from] ZneError),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObservableKind {
    /// Product of Z over the data qubits.
    #[default]
    ZParity,
    /// Projector onto the support of the ideal output distribution.
    IdealProjector,
}

impl fmt::Display for ObservableKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ObservableKind::ZParity => "z_parity",
            ObservableKind::IdealProjector => "ideal_projector",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub algorithm: Benchmark,
    pub n: usize,
    pub k: usize,
    pub p_local: f64,
    pub alpha: f64,
    pub strategy: Strategy,
    pub shots: usize,
    pub backend: Backend,
    pub mode: LoweringMode,
    pub comm_scope: CommScope,
    pub observable: ObservableKind,
    pub seed: u64,
    /// Qubit cap; the backend's default when absent.
    pub max_qubits: Option<usize>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            algorithm: Benchmark::Ghz,
            n: 4,
            k: 2,
            p_local: 0.01,
            alpha: 1.0,
            strategy: Strategy::Global,
            shots: 200,
            backend: Backend::Exact,
            mode: LoweringMode::Roundtrip,
            comm_scope: CommScope::BellOnly,
            observable: ObservableKind::ZParity,
            seed: 0,
            max_qubits: None,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<(), HarnessError> {
        let bad = |m: String| Err(HarnessError::Config(m));
        if self.k < 1 || self.k > self.n {
            return bad(format!("k = {} must satisfy 1 <= k <= n = {}", self.k, self.n));
        }
        if !(0.0..=1.0).contains(&self.p_local) {
            return bad(format!("p_local = {} outside [0, 1]", self.p_local));
        }
        if !(self.alpha >= 0.0 && self.alpha.is_finite()) {
            return bad(format!("alpha = {} must be non-negative", self.alpha));
        }
        if self.backend == Backend::Shots && self.shots == 0 {
            return bad("shots must be at least 1".into());
        }
        Ok(())
    }

    pub fn effective_max_qubits(&self) -> usize {
        self.max_qubits.unwrap_or(match self.backend {
            Backend::Exact => EXACT_MAX_QUBITS,
            Backend::Shots => TRAJECTORY_MAX_QUBITS,
        })
    }

    /// Stable text form of every field except the seed.
    pub fn canonical(&self) -> String {
        format!(
            "algorithm={};n={};k={};p_local={:?};alpha={:?};strategy={};shots={};backend={};mode={};comm_scope={};observable={};max_qubits={}",
            self.algorithm,
            self.n,
            self.k,
            self.p_local,
            self.alpha,
            self.strategy,
            self.shots,
            self.backend,
            self.mode,
            self.comm_scope,
            self.observable,
            self.effective_max_qubits(),
        )
    }

    /// Seed of this experiment: a hash of the master seed and the canonical
    /// config, so a point's seed does not depend on the rest of the grid.
    pub fn experiment_seed(&self) -> u64 {
        let mut h = Sha256::new();
        h.update(self.seed.to_le_bytes());
        h.update(self.canonical().as_bytes());
        let digest = h.finalize();
        u64::from_le_bytes(digest[..8].try_into().expect("digest has 32 bytes"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Ok,
    SkippedCapacity,
}

/// One experiment's outcome. Metric columns are empty for skipped points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRecord {
    pub algorithm: Benchmark,
    pub n: usize,
    pub k: usize,
    pub p_local: f64,
    pub alpha: f64,
    pub strategy: Strategy,
    pub shots: usize,
    pub backend: Backend,
    pub mode: LoweringMode,
    pub comm_scope: CommScope,
    pub observable: ObservableKind,
    pub seed: u64,
    pub max_qubits: usize,
    #[serde(rename = "E_baseline")]
    pub e_baseline: Option<f64>,
    #[serde(rename = "E_zne")]
    pub e_zne: Option<f64>,
    #[serde(rename = "delta_E")]
    pub delta_e: Option<f64>,
    pub error_reduction: Option<f64>,
    pub depth_overhead_max_lambda: Option<f64>,
    pub depth_overhead_total: Option<f64>,
    pub per_partition_depth_max: Option<usize>,
    pub cut_count: Option<usize>,
    pub teleport_count: Option<usize>,
    pub ancilla_count: Option<usize>,
    pub excluded_flag: bool,
    pub backend_used: Backend,
    pub status: Status,
    pub total_qubits: usize,
    pub ideal: Option<f64>,
    pub expectation_baseline: Option<f64>,
    pub expectation_zne: Option<f64>,
    pub depth_original: Option<usize>,
    pub depth_max_lambda: Option<usize>,
    /// Distributed depth at the largest scale over the monolithic depth.
    pub depth_overhead_distributed: Option<f64>,
    pub comm_gates_min: Option<usize>,
    pub comm_gates_max: Option<usize>,
}

impl MetricsRecord {
    fn from_config(cfg: &ExperimentConfig, status: Status, total_qubits: usize) -> Self {
        MetricsRecord {
            algorithm: cfg.algorithm,
            n: cfg.n,
            k: cfg.k,
            p_local: cfg.p_local,
            alpha: cfg.alpha,
            strategy: cfg.strategy,
            shots: cfg.shots,
            backend: cfg.backend,
            mode: cfg.mode,
            comm_scope: cfg.comm_scope,
            observable: cfg.observable,
            seed: cfg.seed,
            max_qubits: cfg.effective_max_qubits(),
            e_baseline: None,
            e_zne: None,
            delta_e: None,
            error_reduction: None,
            depth_overhead_max_lambda: None,
            depth_overhead_total: None,
            per_partition_depth_max: None,
            cut_count: None,
            teleport_count: None,
            ancilla_count: None,
            excluded_flag: false,
            backend_used: cfg.backend,
            status,
            total_qubits,
            ideal: None,
            expectation_baseline: None,
            expectation_zne: None,
            depth_original: None,
            depth_max_lambda: None,
            depth_overhead_distributed: None,
            comm_gates_min: None,
            comm_gates_max: None,
        }
    }

    pub fn is_skipped(&self) -> bool {
        self.status != Status::Ok
    }

    /// Value of a config column as text, for grouping.
    pub fn column(&self, name: &str) -> Option<String> {
        Some(match name {
            "algorithm" => self.algorithm.to_string(),
            "n" => self.n.to_string(),
            "k" => self.k.to_string(),
            "p_local" => self.p_local.to_string(),
            "alpha" => self.alpha.to_string(),
            "strategy" => self.strategy.to_string(),
            "shots" => self.shots.to_string(),
            "backend" => self.backend.to_string(),
            "mode" => self.mode.to_string(),
            "comm_scope" => self.comm_scope.to_string(),
            "observable" => self.observable.to_string(),
            "seed" => self.seed.to_string(),
            "max_qubits" => self.max_qubits.to_string(),
            _ => return None,
        })
    }
}

/// Absolute error of a measured expectation.
pub fn expectation_error(measured: f64, ideal: f64) -> f64 {
    (measured - ideal).abs()
}

/// `(delta_E, error_reduction)`; the reduction is NaN when the baseline
/// error is zero.
pub fn error_metrics(e_baseline: f64, e_zne: f64) -> (f64, f64) {
    let delta = e_baseline - e_zne;
    let reduction = if e_baseline > 0.0 { delta / e_baseline } else { f64::NAN };
    (delta, reduction)
}

pub fn depth_overhead(d_zne: usize, d_original: usize) -> f64 {
    d_zne as f64 / d_original as f64
}

pub fn is_excluded(e_baseline: f64) -> bool {
    e_baseline < EXCLUSION_THRESHOLD
}

pub fn run_experiment(cfg: &ExperimentConfig) -> Result<MetricsRecord, HarnessError> {
    run_experiment_with(cfg, &ScaleSchedule::default())
}

pub fn run_experiment_with(cfg: &ExperimentConfig, schedule: &ScaleSchedule) -> Result<MetricsRecord, HarnessError> {
    cfg.validate()?;
    let max_qubits = cfg.effective_max_qubits();
    let c = generate_benchmark(cfg.algorithm, cfg.n, DjOracle::Balanced)?;
    if cfg.k > c.num_qubits() {
        return Err(HarnessError::Config(format!(
            "k = {} exceeds {} qubits",
            cfg.k,
            c.num_qubits()
        )));
    }
    let a = partition_circuit(&c, cfg.k)?;
    let base = lower(&c, &a, cfg.mode, cfg.comm_scope)?;
    let total_qubits = base.circuit.num_qubits();
    if total_qubits > max_qubits {
        return Ok(MetricsRecord::from_config(cfg, Status::SkippedCapacity, total_qubits));
    }

    let data: Vec<usize> = c.data_qubits().iter().copied().collect();
    let probs = ideal_probabilities(&c, &data, max_qubits.max(c.num_qubits()))?;
    let observable = match cfg.observable {
        ObservableKind::ZParity => Observable::ZParity(data),
        ObservableKind::IdealProjector => Observable::Projector {
            qubits: data,
            support: support_of(&probs, SUPPORT_TOL),
        },
    };
    let ideal = observable.expectation_from_probs(&probs);

    let eval = Evaluator {
        noise: NoiseModel::new(cfg.p_local, cfg.alpha)?,
        observable,
        backend: cfg.backend,
        shots: cfg.shots,
        seed: cfg.experiment_seed(),
        max_qubits,
    };
    let baseline = eval.evaluate(&base, 0)?;
    let result = mitigate(cfg.strategy, &c, &a, schedule, cfg.mode, cfg.comm_scope, &eval)?;

    let e_baseline = expectation_error(baseline, ideal);
    let e_zne = expectation_error(result.zero_noise_estimate, ideal);
    let (delta_e, error_reduction) = error_metrics(e_baseline, e_zne);

    let d_original = c.depth();
    let top = result.per_scale.last().expect("schedule is non-empty");
    let (overhead, overhead_total) = match cfg.strategy {
        Strategy::Global => (
            depth_overhead(top.depth, d_original),
            result
                .per_scale
                .iter()
                .map(|s| depth_overhead(s.depth, d_original))
                .sum(),
        ),
        Strategy::Local => {
            let unfolded = local_subcircuit_depths(&base).into_iter().max().unwrap_or(0);
            (
                depth_overhead(top.local_depth_max, unfolded),
                result
                    .per_scale
                    .iter()
                    .map(|s| depth_overhead(s.local_depth_max, unfolded))
                    .sum(),
            )
        }
    };
    let stats = distributed_stats(&base);

    let mut r = MetricsRecord::from_config(cfg, Status::Ok, total_qubits);
    r.e_baseline = Some(e_baseline);
    r.e_zne = Some(e_zne);
    r.delta_e = Some(delta_e);
    r.error_reduction = Some(error_reduction);
    r.depth_overhead_max_lambda = Some(overhead);
    r.depth_overhead_total = Some(overhead_total);
    r.per_partition_depth_max = stats.partition_depths.iter().copied().max();
    r.cut_count = Some(cut_edges(&c, &a));
    r.teleport_count = Some(base.teleports);
    r.ancilla_count = Some(base.ancilla_count());
    r.excluded_flag = is_excluded(e_baseline);
    r.ideal = Some(ideal);
    r.expectation_baseline = Some(baseline);
    r.expectation_zne = Some(result.zero_noise_estimate);
    r.depth_original = Some(d_original);
    r.depth_max_lambda = Some(top.depth);
    r.depth_overhead_distributed = Some(depth_overhead(top.depth, d_original));
    r.comm_gates_min = result.per_scale.iter().map(|s| s.comm_gates).min();
    r.comm_gates_max = result.per_scale.iter().map(|s| s.comm_gates).max();
    Ok(r)
}

/// Config keys in grid order; the last key varies fastest.
pub const CONFIG_KEYS: [&str; 13] = [
    "algorithm",
    "n",
    "k",
    "p_local",
    "alpha",
    "strategy",
    "shots",
    "backend",
    "mode",
    "comm_scope",
    "observable",
    "seed",
    "max_qubits",
];

const FLOAT_KEYS: [&str; 2] = ["p_local", "alpha"];

/// Expand a flat TOML table into the Cartesian product of its array-valued
/// keys. Scalar keys apply to every point; missing keys take defaults.
pub fn parse_grid(text: &str) -> Result<Vec<ExperimentConfig>, HarnessError> {
    let table: toml::Table = text.parse()?;
    if let Some(key) = table.keys().find(|k| !CONFIG_KEYS.contains(&k.as_str())) {
        return Err(HarnessError::Config(format!("unknown key `{key}`")));
    }
    let mut axes: Vec<(&str, Vec<toml::Value>)> = Vec::new();
    for key in CONFIG_KEYS {
        let Some(v) = table.get(key) else { continue };
        let values = match v {
            toml::Value::Array(items) if items.is_empty() => {
                return Err(HarnessError::Config(format!("axis `{key}` is empty")))
            }
            toml::Value::Array(items) => items.clone(),
            other => vec![other.clone()],
        };
        let values = values
            .into_iter()
            .map(|v| match v {
                toml::Value::Integer(i) if FLOAT_KEYS.contains(&key) => toml::Value::Float(i as f64),
                v => v,
            })
            .collect();
        axes.push((key, values));
    }

    let mut points = vec![toml::Table::new()];
    for (key, values) in &axes {
        points = points
            .into_iter()
            .flat_map(|p| {
                values.iter().map(move |v| {
                    let mut q = p.clone();
                    q.insert((*key).to_string(), v.clone());
                    q
                })
            })
            .collect();
    }
    points
        .into_iter()
        .map(|p| {
            let cfg: ExperimentConfig = toml::Value::Table(p).try_into()?;
            cfg.validate()?;
            Ok(cfg)
        })
        .collect()
}

/// Parse a config that must describe exactly one experiment.
pub fn parse_single(text: &str) -> Result<ExperimentConfig, HarnessError> {
    let mut grid = parse_grid(text)?;
    if grid.len() != 1 {
        return Err(HarnessError::Config(format!(
            "expected a single experiment, the config describes {}",
            grid.len()
        )));
    }
    Ok(grid.remove(0))
}

/// Run every grid point in parallel; records come back in grid order.
pub fn sweep(grid: &[ExperimentConfig]) -> Result<Vec<MetricsRecord>, HarnessError> {
    if grid.is_empty() {
        return Err(HarnessError::Config("grid is empty".into()));
    }
    grid.par_iter().map(run_experiment).collect()
}

pub fn write_csv<W: io::Write>(records: &[MetricsRecord], out: W) -> Result<(), HarnessError> {
    let mut w = csv::Writer::from_writer(out);
    for r in records {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_csv_file(records: &[MetricsRecord], path: &Path) -> Result<(), HarnessError> {
    write_csv(records, std::fs::File::create(path)?)
}

pub fn read_csv<R: io::Read>(input: R) -> Result<Vec<MetricsRecord>, HarnessError> {
    csv::Reader::from_reader(input)
        .deserialize()
        .map(|r| r.map_err(HarnessError::from))
        .collect()
}

/// Mean after dropping `floor(trim * n)` values from each end of the sorted
/// sample. `None` for an empty sample.
pub fn trimmed_mean(values: &[f64], trim: f64) -> Option<f64> {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let cut = (trim * v.len() as f64).floor() as usize;
    let kept = v.get(cut..v.len().saturating_sub(cut))?;
    if kept.is_empty() {
        return None;
    }
    Some(kept.iter().sum::<f64>() / kept.len() as f64)
}

pub fn median(values: &[f64]) -> Option<f64> {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    match n {
        0 => None,
        _ if n % 2 == 1 => Some(v[n / 2]),
        _ => Some((v[n / 2 - 1] + v[n / 2]) / 2.0),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummaryRow {
    /// Values of the group-by columns, in the requested order.
    pub group: Vec<String>,
    pub metric: String,
    pub count: usize,
    pub excluded: usize,
    pub trimmed_mean: Option<f64>,
    pub median: Option<f64>,
}

/// Aggregate error reduction and depth overhead per group.
///
/// Skipped points are ignored. Excluded points are dropped from the
/// error-reduction aggregate (and counted) but kept for depth overhead.
pub fn summarize(records: &[MetricsRecord], group_by: &[String], trim: f64) -> Result<Vec<SummaryRow>, HarnessError> {
    if !(0.0..0.5).contains(&trim) {
        return Err(HarnessError::Config(format!("trim = {trim} outside [0, 0.5)")));
    }
    let mut groups: BTreeMap<Vec<String>, Vec<&MetricsRecord>> = BTreeMap::new();
    for r in records.iter().filter(|r| !r.is_skipped()) {
        let key = group_by
            .iter()
            .map(|col| {
                r.column(col)
                    .ok_or_else(|| HarnessError::Config(format!("unknown group-by column `{col}`")))
            })
            .collect::<Result<Vec<_>, _>>()?;
        groups.entry(key).or_default().push(r);
    }
    let mut rows = Vec::new();
    for (group, members) in groups {
        let reductions: Vec<f64> = members
            .iter()
            .filter(|r| !r.excluded_flag)
            .filter_map(|r| r.error_reduction)
            .collect();
        let excluded = members.iter().filter(|r| r.excluded_flag).count();
        rows.push(SummaryRow {
            group: group.clone(),
            metric: "error_reduction".into(),
            count: reductions.len(),
            excluded,
            trimmed_mean: trimmed_mean(&reductions, trim),
            median: median(&reductions),
        });
        let overheads: Vec<f64> = members.iter().filter_map(|r| r.depth_overhead_max_lambda).collect();
        rows.push(SummaryRow {
            group,
            metric: "depth_overhead_max_lambda".into(),
            count: overheads.len(),
            excluded: 0,
            trimmed_mean: trimmed_mean(&overheads, trim),
            median: median(&overheads),
        });
    }
    Ok(rows)
}

pub fn write_summary<W: io::Write>(rows: &[SummaryRow], group_by: &[String], out: W) -> Result<(), HarnessError> {
    let mut w = csv::Writer::from_writer(out);
    let mut header: Vec<&str> = group_by.iter().map(String::as_str).collect();
    header.extend(["metric", "count", "excluded", "trimmed_mean", "median"]);
    w.write_record(&header)?;
    let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    for r in rows {
        let mut rec = r.group.clone();
        rec.extend([
            r.metric.clone(),
            r.count.to_string(),
            r.excluded.to_string(),
            opt(r.trimmed_mean),
            opt(r.median),
        ]);
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn metric_arithmetic() {
        let (d, r) = error_metrics(0.2, 0.1);
        assert!((d - 0.1).abs() < 1e-15 && (r - 0.5).abs() < 1e-12);
        assert_eq!(error_metrics(0.2, 0.4).1, -1.0);
        assert!(error_metrics(0.0, 0.0).1.is_nan());
        assert_eq!(depth_overhead(30, 10), 3.0);
        assert!(is_excluded(0.01) && !is_excluded(0.2) && !is_excluded(0.03));
    }

    #[test]
    fn trimmed_mean_cases() {
        assert_eq!(trimmed_mean(&[-10.0, 0.0, 0.0, 0.0, 10.0], 0.2), Some(0.0));
        assert_eq!(trimmed_mean(&[1.0, 2.0, 6.0], 0.0), Some(3.0));
        assert_eq!(trimmed_mean(&[], 0.1), None);
        assert_eq!(median(&[3.0, 1.0, 2.0, 10.0]), Some(2.5));
    }

    #[test]
    fn grid_expansion() {
        let g = parse_grid(
            "algorithm = [\"ghz\", \"w\"]\np_local = [0.001, 0.01, 0.02]\nstrategy = [\"global\", \"local\"]\n",
        )
        .unwrap();
        assert_eq!(g.len(), 12);
        assert_eq!(g[0].algorithm, Benchmark::Ghz);
        assert_eq!(g[1].strategy, Strategy::Local);
        assert!(parse_grid("bogus = 1").is_err());
        assert!(parse_grid("n = 2\nk = 3").is_err());
        assert_eq!(parse_single("p_local = 0").unwrap().p_local, 0.0);
    }

    #[test]
    fn seed_depends_on_config_only() {
        let a = ExperimentConfig::default();
        let mut b = a.clone();
        assert_eq!(a.experiment_seed(), b.experiment_seed());
        b.p_local = 0.02;
        assert_ne!(a.experiment_seed(), b.experiment_seed());
        b = a.clone();
        b.seed = 1;
        assert_ne!(a.experiment_seed(), b.experiment_seed());
    }

    #[test]
    fn capacity_skip() {
        let cfg = ExperimentConfig {
            max_qubits: Some(4),
            ..ExperimentConfig::default()
        };
        let r = run_experiment(&cfg).unwrap();
        assert_eq!(r.status, Status::SkippedCapacity);
        assert!(r.e_baseline.is_none());
    }

    #[test]
    fn ghz_experiment_runs() {
        let r = run_experiment(&ExperimentConfig::default()).unwrap();
        assert_eq!(r.status, Status::Ok);
        assert!((r.ideal.unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(r.comm_gates_min, r.comm_gates_max);
        let (d, e) = (r.delta_e.unwrap(), r.e_baseline.unwrap());
        assert!((d - (e - r.e_zne.unwrap())).abs() < 1e-12);
    }
}
