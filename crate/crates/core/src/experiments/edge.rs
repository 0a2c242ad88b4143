use serde::{Deserialize, Serialize};

use super::{mean, rms, run_trials, std_err, trial_sample, Check, ExperimentConfig, ExperimentKind, Report, ReportHeader};
use crate::error::{Error, Result};
use crate::law::{edge_report, EdgeReport};
use crate::spectra::eigenvalues;
use crate::twref::{ks_distance, TwReference};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeNormRecord {
    pub trial: u64,
    pub lambda1: f64,
    /// `λ₁ − L₊`.
    pub dev_corrected: f64,
    /// `λ₁ − λ₊`.
    pub dev_mp: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeNormSummary {
    pub l_plus: f64,
    pub lambda_plus: f64,
    pub mean_lambda1: f64,
    pub std_err_lambda1: f64,
    pub bias_corrected: f64,
    pub bias_mp: f64,
    pub rms_corrected: f64,
    pub rms_mp: f64,
    /// `C (q_t⁻⁴ + N^{-2/3})`.
    pub rms_bound: f64,
}

pub type EdgeNormReport = Report<EdgeNormRecord, EdgeNormSummary>;

fn largest_eigenvalues(config: &ExperimentConfig) -> Result<(Vec<(u64, f64)>, Vec<super::TrialFailure>)> {
    run_trials(config.jobs, config.trials, |trial| {
        let spec = eigenvalues(&trial_sample(config, trial)?)?;
        Ok(spec.lambdas[0])
    })
}

/// Largest eigenvalue against the corrected edge `L₊` and the plain `λ₊`.
pub fn run_edge_norm(config: &ExperimentConfig) -> Result<EdgeNormReport> {
    config.validate()?;
    let edges = edge_report(&config.law)?;
    let (done, failures) = largest_eigenvalues(config)?;
    let records: Vec<EdgeNormRecord> = done
        .into_iter()
        .map(|(trial, lambda1)| EdgeNormRecord {
            trial,
            lambda1,
            dev_corrected: lambda1 - edges.l_plus,
            dev_mp: lambda1 - edges.lambda_plus,
        })
        .collect();
    let l1: Vec<f64> = records.iter().map(|r| r.lambda1).collect();
    let dc: Vec<f64> = records.iter().map(|r| r.dev_corrected).collect();
    let dm: Vec<f64> = records.iter().map(|r| r.dev_mp).collect();
    let n = config.ensemble.n as f64;
    let th = &config.thresholds;
    let mean_lambda1 = mean(&l1);
    let summary = EdgeNormSummary {
        l_plus: edges.l_plus,
        lambda_plus: edges.lambda_plus,
        mean_lambda1,
        std_err_lambda1: std_err(&l1),
        bias_corrected: (mean_lambda1 - edges.l_plus).abs(),
        bias_mp: (mean_lambda1 - edges.lambda_plus).abs(),
        rms_corrected: rms(&dc),
        rms_mp: rms(&dm),
        rms_bound: th.constant * (config.law.q_t().powi(-4) + n.powf(-2.0 / 3.0)),
    };
    // With s⁴ = 0 both edges coincide and the biases are equal.
    let bias = if config.law.c4() == 0.0 {
        Check::at_most("bias_corrected_vs_mp", summary.bias_corrected, summary.bias_mp)
    } else {
        Check::below("bias_corrected_vs_mp", summary.bias_corrected, summary.bias_mp)
    };
    let checks = vec![bias, Check::at_most("rms_corrected", summary.rms_corrected, summary.rms_bound)];
    Ok(Report {
        header: ReportHeader::new(ExperimentKind::EdgeNorm),
        config: config.clone(),
        summary,
        checks,
        warnings: Vec::new(),
        failures,
        records,
    })
}

/// `γ = √d (1 + √d)^{-4/3}`.
pub fn tw_gamma(d: f64) -> f64 {
    d.sqrt() * (1.0 + d.sqrt()).powf(-4.0 / 3.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TwRecord {
    pub trial: u64,
    pub lambda1: f64,
    /// `γ N^{2/3} (λ₁ − L₊)`.
    pub rescaled: f64,
    /// `γ N^{2/3} (λ₁ − λ₊)`.
    pub rescaled_mp: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TwSummary {
    pub gamma: f64,
    pub l_plus: f64,
    pub lambda_plus: f64,
    pub ks_corrected: f64,
    pub ks_uncorrected: f64,
    pub mean_rescaled: f64,
    pub variance_rescaled: f64,
    pub reference_count: usize,
    pub reference_n_internal: usize,
    pub reference_mean: f64,
    pub reference_variance: f64,
}

pub type TwReport = Report<TwRecord, TwSummary>;

/// Rescaled largest eigenvalues against a Tracy–Widom (β = 1) reference.
pub fn run_tw_limit(config: &ExperimentConfig, reference: &TwReference) -> Result<TwReport> {
    config.validate()?;
    if reference.count() == 0 {
        return Err(Error::Cache("empty Tracy-Widom reference".into()));
    }
    let mut warnings = Vec::new();
    let n = config.ensemble.n as f64;
    let floor = n.powf(1.0 / 6.0 + config.thresholds.tw_margin);
    if config.ensemble.q < floor {
        warnings.push(format!(
            "q = {:.4} is below N^(1/6 + {}) = {floor:.4}; the Tracy-Widom limit is not expected",
            config.ensemble.q, config.thresholds.tw_margin
        ));
    }
    let edges: EdgeReport = edge_report(&config.law)?;
    let gamma = tw_gamma(config.law.d);
    let scale = gamma * n.powf(2.0 / 3.0);
    let (done, failures) = largest_eigenvalues(config)?;
    let records: Vec<TwRecord> = done
        .into_iter()
        .map(|(trial, lambda1)| TwRecord {
            trial,
            lambda1,
            rescaled: scale * (lambda1 - edges.l_plus),
            rescaled_mp: scale * (lambda1 - edges.lambda_plus),
        })
        .collect();
    let mut corrected: Vec<f64> = records.iter().map(|r| r.rescaled).collect();
    let mut uncorrected: Vec<f64> = records.iter().map(|r| r.rescaled_mp).collect();
    corrected.sort_by(f64::total_cmp);
    uncorrected.sort_by(f64::total_cmp);
    let m = mean(&corrected);
    let variance = if corrected.len() > 1 {
        corrected.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (corrected.len() - 1) as f64
    } else {
        0.0
    };
    let summary = TwSummary {
        gamma,
        l_plus: edges.l_plus,
        lambda_plus: edges.lambda_plus,
        ks_corrected: ks_distance(&corrected, reference)?,
        ks_uncorrected: ks_distance(&uncorrected, reference)?,
        mean_rescaled: m,
        variance_rescaled: variance,
        reference_count: reference.count(),
        reference_n_internal: reference.n_internal,
        reference_mean: reference.mean(),
        reference_variance: reference.variance(),
    };
    let checks = vec![
        Check::below("ks_corrected", summary.ks_corrected, config.thresholds.ks_max),
        Check::below("ks_corrected_vs_uncorrected", summary.ks_corrected, summary.ks_uncorrected),
    ];
    Ok(Report {
        header: ReportHeader::new(ExperimentKind::TwLimit),
        config: config.clone(),
        summary,
        checks,
        warnings,
        failures,
        records,
    })
}

/// [`run_tw_limit`] with the reference read from the configured cache file.
/// A missing or invalid cache is an error; build it with `tw-build-cache`.
pub fn run_tw_limit_cached(config: &ExperimentConfig) -> Result<TwReport> {
    let path = &config.tw.cache;
    if !path.exists() {
        return Err(Error::Cache(format!("no Tracy-Widom reference at {}", path.display())));
    }
    let reference = TwReference::load(path)?;
    run_tw_limit(config, &reference)
}
