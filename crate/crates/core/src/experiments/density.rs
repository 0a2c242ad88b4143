use serde::{Deserialize, Serialize};

use super::{run_trials, trial_sample, Check, ExperimentConfig, ExperimentKind, Report, ReportHeader};
use crate::ensemble::EntryLaw;
use crate::error::{Error, Result};
use crate::law::{edge_report, integrated_density, linspace, LawParams};
use crate::spectra::eigenvalues;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityRecord {
    pub bin: usize,
    pub lo: f64,
    pub hi: f64,
    pub count: u64,
    pub empirical: f64,
    /// `∫_bin ρ̃`.
    pub law: f64,
    /// `∫_bin ρ_MP`.
    pub mp: f64,
    /// Binomial standard error of the pooled fraction.
    pub std_err: f64,
    pub deviation: f64,
    /// `C (width/q_t² + 1/N)`.
    pub allowed: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensitySummary {
    pub pooled: u64,
    /// Zero eigenvalues of the rank deficiency, `N − M` per trial.
    pub atom: u64,
    pub below: u64,
    pub above: u64,
    /// `|bins + atom + tails − pooled| / pooled`.
    pub closure_error: f64,
    pub max_deviation_ratio: f64,
    pub max_std_errs: f64,
    pub ssd_corrected: f64,
    pub ssd_mp: f64,
}

pub type DensityReport = Report<DensityRecord, DensitySummary>;

/// Histogram of pooled eigenvalues over `bins` equal bins on the corrected
/// support, against the corrected and the plain Marchenko–Pastur laws.
pub fn run_density_compare(config: &ExperimentConfig) -> Result<DensityReport> {
    config.validate()?;
    let law = config.law;
    let edges = edge_report(&law)?;
    let (lo, hi) = (edges.support_lo(), edges.l_plus);
    let domain = law.domain();
    if lo < domain.e_lo.min(0.0) || hi > domain.e_hi {
        return Err(Error::param("bins leave the spectral domain"));
    }
    let cuts = linspace(lo, hi, config.bins + 1);
    let mp = LawParams::marchenko_pastur(law.d)?;
    let (n, m) = (config.ensemble.n, config.ensemble.m);

    let (done, failures) = run_trials(config.jobs, config.trials, |trial| {
        let spec = eigenvalues(&trial_sample(config, trial)?)?;
        let mut counts = vec![0u64; config.bins + 2];
        for &l in &spec.lambdas[..m.min(n)] {
            // bins are (c_k, c_{k+1}], the first one closed
            let slot = if l < lo {
                0
            } else if l > hi {
                config.bins + 1
            } else {
                cuts.partition_point(|&c| c < l).clamp(1, config.bins)
            };
            counts[slot] += 1;
        }
        Ok(counts)
    })?;
    let trials = done.len() as u64;
    let mut counts = vec![0u64; config.bins + 2];
    for (_, c) in &done {
        for (acc, v) in counts.iter_mut().zip(c) {
            *acc += v;
        }
    }
    let pooled = trials * n as u64;
    let atom = trials * (n - m.min(n)) as u64;
    let th = &config.thresholds;
    let sparse = if config.ensemble.dist == EntryLaw::Gaussian { 0.0 } else { law.q_t().powi(-2) };

    let mut records = Vec::with_capacity(config.bins);
    for b in 0..config.bins {
        let (a, z) = (cuts[b], cuts[b + 1]);
        let expected = integrated_density(a, z, &law)?;
        let mp_mass = integrated_density(a, z, &mp)?;
        let empirical = counts[b + 1] as f64 / pooled as f64;
        let std_err = (expected * (1.0 - expected) / pooled as f64).sqrt();
        records.push(DensityRecord {
            bin: b,
            lo: a,
            hi: z,
            count: counts[b + 1],
            empirical,
            law: expected,
            mp: mp_mass,
            std_err,
            deviation: (empirical - expected).abs(),
            allowed: th.constant * ((z - a) * sparse + 1.0 / n as f64),
        });
    }
    let binned: u64 = records.iter().map(|r| r.count).sum();
    let (below, above) = (counts[0], counts[config.bins + 1]);
    let closure = binned + atom + below + above;
    let summary = DensitySummary {
        pooled,
        atom,
        below,
        above,
        closure_error: (closure as f64 - pooled as f64).abs() / pooled as f64,
        max_deviation_ratio: records.iter().map(|r| r.deviation / r.allowed).fold(0.0, f64::max),
        max_std_errs: records
            .iter()
            .map(|r| if r.std_err > 0.0 { r.deviation / r.std_err } else { 0.0 })
            .fold(0.0, f64::max),
        ssd_corrected: records.iter().map(|r| (r.empirical - r.law).powi(2)).sum(),
        ssd_mp: records.iter().map(|r| (r.empirical - r.mp).powi(2)).sum(),
    };
    let mut checks = vec![
        Check::at_most("mass_closure", summary.closure_error, 0.0),
        Check::at_most("max_deviation_ratio", summary.max_deviation_ratio, 1.0),
    ];
    if config.ensemble.dist == EntryLaw::Gaussian {
        checks.push(Check::at_most("max_bin_std_errs", summary.max_std_errs, th.bin_se));
    } else if law.c4() != 0.0 {
        checks.push(Check::below("ssd_corrected_vs_mp", summary.ssd_corrected, summary.ssd_mp));
    }
    Ok(Report {
        header: ReportHeader::new(ExperimentKind::Density),
        config: config.clone(),
        summary,
        checks,
        warnings: Vec::new(),
        failures,
        records,
    })
}
