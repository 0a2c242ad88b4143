use serde::{Deserialize, Serialize};

use super::{fraction_at_most, run_trials, trial_sample, Check, ExperimentConfig, ExperimentKind, Report, ReportHeader};
use crate::error::{Error, Result};
use crate::law::classical_locations;
use crate::spectra::{delocalization_stat, eigenvalues};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RigidityRecord {
    pub trial: u64,
    pub j: usize,
    pub lambda: f64,
    pub gamma: f64,
    pub deviation: f64,
    /// `j^{-1/3} N^{-2/3} + q_t⁻²`.
    pub bound: f64,
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DelocRecord {
    pub trial: u64,
    pub statistic: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RigiditySummary {
    pub classical_locations: Vec<f64>,
    pub rigidity_fraction: f64,
    pub ratio_max: f64,
    /// `N^{-1/2 + ε}`.
    pub deloc_bound: f64,
    pub deloc_fraction: f64,
    pub deloc_max: f64,
    pub deloc: Vec<DelocRecord>,
}

pub type RigidityReport = Report<RigidityRecord, RigiditySummary>;

/// Top `j_max` eigenvalues against classical locations, and the
/// delocalization statistic of every trial.
pub fn run_rigidity_deloc(config: &ExperimentConfig) -> Result<RigidityReport> {
    config.validate()?;
    let th = &config.thresholds;
    let n = config.ensemble.n;
    let nf = n as f64;
    if th.j_max == 0 || th.j_max > config.ensemble.m {
        return Err(Error::param(format!("j_max must lie in 1..=M, got {}", th.j_max)));
    }
    let mut warnings = Vec::new();
    if config.ensemble.q < nf.cbrt() {
        warnings.push(format!(
            "q = {:.4} is below N^(1/3) = {:.4}; rigidity is only expected above it",
            config.ensemble.q,
            nf.cbrt()
        ));
    }
    let gammas = classical_locations(th.j_max, n, &config.law)?;
    let sparse = config.law.q_t().powi(-2);

    let (done, failures) = run_trials(config.jobs, config.trials, |trial| {
        let sample = trial_sample(config, trial)?;
        let spec = eigenvalues(&sample)?;
        let stat = delocalization_stat(&sample)?;
        Ok((spec.lambdas[..th.j_max].to_vec(), stat))
    })?;

    let mut records = Vec::with_capacity(done.len() * th.j_max);
    let mut deloc = Vec::with_capacity(done.len());
    for (trial, (lambdas, stat)) in &done {
        for (k, (&lambda, &gamma)) in lambdas.iter().zip(&gammas).enumerate() {
            let j = k + 1;
            let deviation = (lambda - gamma).abs();
            let bound = (j as f64).powf(-1.0 / 3.0) * nf.powf(-2.0 / 3.0) + sparse;
            records.push(RigidityRecord { trial: *trial, j, lambda, gamma, deviation, bound, ratio: deviation / bound });
        }
        deloc.push(DelocRecord { trial: *trial, statistic: *stat });
    }
    let ratios: Vec<f64> = records.iter().map(|r| r.ratio).collect();
    let stats: Vec<f64> = deloc.iter().map(|r| r.statistic).collect();
    let deloc_bound = nf.powf(-0.5 + th.deloc_eps);
    let summary = RigiditySummary {
        classical_locations: gammas,
        rigidity_fraction: fraction_at_most(&ratios, th.constant),
        ratio_max: ratios.iter().copied().fold(0.0, f64::max),
        deloc_bound,
        deloc_fraction: fraction_at_most(&stats, deloc_bound),
        deloc_max: stats.iter().copied().fold(0.0, f64::max),
        deloc,
    };
    let checks = vec![
        Check::at_least("rigidity_fraction", summary.rigidity_fraction, th.fraction),
        Check::at_least("deloc_fraction", summary.deloc_fraction, th.fraction),
    ];
    Ok(Report {
        header: ReportHeader::new(ExperimentKind::Rigidity),
        config: config.clone(),
        summary,
        checks,
        warnings,
        failures,
        records,
    })
}
