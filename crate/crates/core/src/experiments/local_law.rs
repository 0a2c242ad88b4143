use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::{fraction_at_most, quantile, run_trials, trial_sample, Check, ExperimentConfig, ExperimentKind, Report, ReportHeader};
use crate::ensemble::EntryLaw;
use crate::error::{Error, Result};
use crate::law::solve_self_consistent;
use crate::spectra::{eigenvalues, empirical_stieltjes};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalLawRecord {
    pub trial: u64,
    pub e: f64,
    pub eta: f64,
    pub m_re: f64,
    pub m_im: f64,
    pub m_law_re: f64,
    pub m_law_im: f64,
    /// `Λ_t = |m − m̃|`.
    pub lambda_t: f64,
    pub bound: f64,
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalLawSummary {
    pub points: usize,
    pub fraction_within: f64,
    pub ratio_median: f64,
    pub ratio_q95: f64,
    pub ratio_max: f64,
    pub lambda_t_max: f64,
}

pub type LocalLawReport = Report<LocalLawRecord, LocalLawSummary>;

/// Empirical Stieltjes transform against the corrected law on the grid,
/// with bound `1/q_t² + 1/(Nη)` (sparse term dropped for Gaussian entries).
pub fn run_local_law(config: &ExperimentConfig) -> Result<LocalLawReport> {
    config.validate()?;
    let law = config.law;
    let n = config.ensemble.n as f64;
    let points = config.grid.points(&law)?;
    let laws = points
        .iter()
        .map(|&(e, eta)| solve_self_consistent(Complex64::new(e, eta), &law).map(|s| s.w))
        .collect::<Result<Vec<_>>>()?;
    let sparse_term = if config.ensemble.dist == EntryLaw::Gaussian { 0.0 } else { law.q_t().powi(-2) };

    let (done, failures) = run_trials(config.jobs, config.trials, |trial| {
        let spec = eigenvalues(&trial_sample(config, trial)?)?;
        Ok(points
            .iter()
            .zip(&laws)
            .map(|(&(e, eta), &w)| {
                let m = empirical_stieltjes(&spec, Complex64::new(e, eta));
                let lambda_t = (m - w).norm();
                let bound = sparse_term + 1.0 / (n * eta);
                LocalLawRecord {
                    trial,
                    e,
                    eta,
                    m_re: m.re,
                    m_im: m.im,
                    m_law_re: w.re,
                    m_law_im: w.im,
                    lambda_t,
                    bound,
                    ratio: lambda_t / bound,
                }
            })
            .collect::<Vec<_>>())
    })?;
    let records: Vec<LocalLawRecord> = done.into_iter().flat_map(|(_, r)| r).collect();
    if records.is_empty() {
        return Err(Error::Numerical("no grid points evaluated".into()));
    }

    let mut ratios: Vec<f64> = records.iter().map(|r| r.ratio).collect();
    ratios.sort_by(f64::total_cmp);
    let th = &config.thresholds;
    let summary = LocalLawSummary {
        points: records.len(),
        fraction_within: fraction_at_most(&ratios, th.constant),
        ratio_median: quantile(&ratios, 0.5),
        ratio_q95: quantile(&ratios, 0.95),
        ratio_max: *ratios.last().unwrap(),
        lambda_t_max: records.iter().map(|r| r.lambda_t).fold(0.0, f64::max),
    };
    let checks = vec![Check::at_least("fraction_within_constant", summary.fraction_within, th.fraction)];
    Ok(Report {
        header: ReportHeader::new(ExperimentKind::LocalLaw),
        config: config.clone(),
        summary,
        checks,
        warnings: Vec::new(),
        failures,
        records,
    })
}
