//! Monte Carlo experiments.
//!
//! Each runner draws `trials` independent samples on a pool of `jobs`
//! threads. Trial `i` only depends on `(seed, i)` and results are assembled
//! in trial order, so a report does not depend on the thread count.

mod config;
mod density;
mod edge;
mod flow;
mod local_law;
mod rigidity;

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::ensemble::{dyson_flow_at, sample_matrix, FlowState, MatrixSample};
use crate::error::{Error, Result};

pub use config::{
    default_t_grid, law_for, ConfigMap, EnergySpec, ExperimentConfig, ExperimentKind, GridSpec, Thresholds,
    TwSettings, KNOWN_KEYS,
};
pub use density::{run_density_compare, DensityRecord, DensityReport, DensitySummary};
pub use edge::{
    run_edge_norm, run_tw_limit, run_tw_limit_cached, tw_gamma, EdgeNormRecord, EdgeNormReport, EdgeNormSummary,
    TwRecord, TwReport, TwSummary,
};
pub use flow::{run_flow_tracking, FlowPoint, FlowRecord, FlowReport, FlowSummary, SlopeCheck};
pub use local_law::{run_local_law, LocalLawRecord, LocalLawReport, LocalLawSummary};
pub use rigidity::{run_rigidity_deloc, DelocRecord, RigidityRecord, RigidityReport, RigiditySummary};

pub const SCHEMA_VERSION: u32 = 1;
pub const CODE_VERSION: &str = concat!("mplab ", env!("CARGO_PKG_VERSION"));

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportHeader {
    pub schema_version: u32,
    pub experiment: ExperimentKind,
    pub code_version: String,
}

impl ReportHeader {
    pub fn new(experiment: ExperimentKind) -> Self {
        Self { schema_version: SCHEMA_VERSION, experiment, code_version: CODE_VERSION.to_string() }
    }
}

/// One pass/fail criterion of a report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub threshold: f64,
    pub passed: bool,
}

impl Check {
    pub fn at_most(name: &str, value: f64, threshold: f64) -> Self {
        Self { name: name.into(), value, threshold, passed: value <= threshold }
    }

    pub fn below(name: &str, value: f64, threshold: f64) -> Self {
        Self { name: name.into(), value, threshold, passed: value < threshold }
    }

    pub fn at_least(name: &str, value: f64, threshold: f64) -> Self {
        Self { name: name.into(), value, threshold, passed: value >= threshold }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialFailure {
    pub trial: u64,
    pub error: String,
}

/// Report shared by all experiments: header, resolved config, flat records,
/// an experiment-specific summary and the derived checks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report<R, S> {
    pub header: ReportHeader,
    pub config: ExperimentConfig,
    pub summary: S,
    pub checks: Vec<Check>,
    pub warnings: Vec<String>,
    pub failures: Vec<TrialFailure>,
    pub records: Vec<R>,
}

impl<R, S> Report<R, S>
where
    R: Serialize + DeserializeOwned,
    S: Serialize + DeserializeOwned,
{
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let report: Self = serde_json::from_str(text)?;
        if report.header.schema_version != SCHEMA_VERSION {
            return Err(Error::Data(format!(
                "report schema version {} (expected {SCHEMA_VERSION})",
                report.header.schema_version
            )));
        }
        report.config.validate()?;
        Ok(report)
    }

    pub fn write_records_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        for r in &self.records {
            w.serialize(r)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Writes `<stem>.json` and `<stem>.csv` into `dir`.
    pub fn write_to(&self, dir: &Path) -> Result<(PathBuf, PathBuf)> {
        fs::create_dir_all(dir)?;
        let stem = self.config.file_stem();
        let json = dir.join(format!("{stem}.json"));
        let csv = dir.join(format!("{stem}.csv"));
        fs::write(&json, self.to_json()?)?;
        self.write_records_csv(fs::File::create(&csv)?)?;
        Ok((json, csv))
    }
}

/// Runs `f` on a fresh pool of `jobs` threads.
pub fn install<T, F>(jobs: usize, f: F) -> Result<T>
where
    T: Send,
    F: FnOnce() -> T + Send,
{
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::Numerical(format!("cannot start thread pool: {e}")))?;
    Ok(pool.install(f))
}

/// Runs `f(0..trials)` on `jobs` threads and returns the successes in trial
/// order. Numerical failures of single trials are recorded; parameter-like
/// errors abort the run, as does the failure of every trial.
pub(crate) fn run_trials<T, F>(jobs: usize, trials: usize, f: F) -> Result<(Vec<(u64, T)>, Vec<TrialFailure>)>
where
    T: Send,
    F: Fn(u64) -> Result<T> + Sync + Send,
{
    let outcomes: Vec<(u64, Result<T>)> =
        install(jobs, || (0..trials as u64).into_par_iter().map(|i| (i, f(i))).collect())?;
    let mut done = Vec::with_capacity(trials);
    let mut failures = Vec::new();
    let mut first_error = None;
    for (i, outcome) in outcomes {
        match outcome {
            Ok(v) => done.push((i, v)),
            Err(e) if e.exit_code() == 1 => return Err(e),
            Err(e) => {
                failures.push(TrialFailure { trial: i, error: e.to_string() });
                first_error.get_or_insert(e);
            }
        }
    }
    match first_error {
        Some(e) if done.is_empty() => Err(e),
        _ => Ok((done, failures)),
    }
}

/// Sample of trial `i`, flowed to the configured law time.
pub(crate) fn trial_sample(config: &ExperimentConfig, trial: u64) -> Result<MatrixSample> {
    let x0 = sample_matrix(&config.ensemble, trial)?;
    if config.law.t == 0.0 {
        return Ok(x0);
    }
    dyson_flow_at(&FlowState::new(x0, config.law.t))
}

pub(crate) fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Standard error of the mean (0 for fewer than two values).
pub(crate) fn std_err(v: &[f64]) -> f64 {
    if v.len() < 2 {
        return 0.0;
    }
    let m = mean(v);
    let var = v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (v.len() - 1) as f64;
    (var / v.len() as f64).sqrt()
}

pub(crate) fn rms(v: &[f64]) -> f64 {
    (v.iter().map(|x| x * x).sum::<f64>() / v.len() as f64).sqrt()
}

/// Empirical quantile of sorted data (nearest rank).
pub(crate) fn quantile(sorted: &[f64], p: f64) -> f64 {
    let k = ((p * sorted.len() as f64).ceil() as usize).clamp(1, sorted.len());
    sorted[k - 1]
}

pub(crate) fn fraction_at_most(v: &[f64], bound: f64) -> f64 {
    v.iter().filter(|&&x| x <= bound).count() as f64 / v.len() as f64
}
