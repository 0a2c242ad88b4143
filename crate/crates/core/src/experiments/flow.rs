use serde::{Deserialize, Serialize};

use super::{mean, run_trials, std_err, Check, ExperimentConfig, ExperimentKind, Report, ReportHeader};
use crate::ensemble::{dyson_flow_at, sample_matrix, EnsembleParams, FlowState};
use crate::error::Result;
use crate::law::{edge_newton, edge_report, EdgeSide, LawParams};
use crate::spectra::eigenvalues;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowRecord {
    pub trial: u64,
    pub t: f64,
    pub lambda1: f64,
}

/// Aggregates at one flow time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowPoint {
    pub t: f64,
    pub mean_lambda1: f64,
    pub std_err_lambda1: f64,
    pub l_newton: f64,
    pub l_asym: f64,
    pub l_dot: f64,
}

/// Forward finite-difference slope of `L_t` (Newton) at `t = 0` against `L̇₀`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlopeCheck {
    /// Law the slope was evaluated for (`q` raised to the configured minimum
    /// when the ensemble's `q` is smaller).
    pub law: LawParams,
    pub step: f64,
    pub slope_fd: f64,
    pub l_dot: f64,
    pub rel_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowSummary {
    pub points: Vec<FlowPoint>,
    pub slope: SlopeCheck,
    pub gaussian_mean_lambda1: f64,
    pub gaussian_std_err_lambda1: f64,
    pub gaussian_trials: usize,
    /// `|mean λ₁(t_max) − Gaussian mean| / combined standard error`.
    pub endpoint_z: f64,
}

pub type FlowReport = Report<FlowRecord, FlowSummary>;

const SLOPE_STEP: f64 = 1e-3;

fn slope_check(law: LawParams) -> Result<SlopeCheck> {
    let h = SLOPE_STEP;
    let l = |t: f64| -> Result<f64> { Ok(edge_newton(&law.with_t(t)?, EdgeSide::Plus)?.location) };
    let slope_fd = (-3.0 * l(0.0)? + 4.0 * l(h)? - l(2.0 * h)?) / (2.0 * h);
    let l_dot = edge_report(&law.with_t(0.0)?)?.ldot;
    let rel_error = if l_dot == 0.0 { slope_fd.abs() } else { ((slope_fd - l_dot) / l_dot).abs() };
    Ok(SlopeCheck { law, step: h, slope_fd, l_dot, rel_error })
}

/// Largest eigenvalue along the Dyson matrix flow against `L_t`, plus the
/// Gaussian ensemble at the same `(N, M)` for the endpoint.
pub fn run_flow_tracking(config: &ExperimentConfig) -> Result<FlowReport> {
    config.validate()?;
    let mut warnings = Vec::new();
    let base = config.law.with_t(0.0)?;
    let mut t_grid = config.t_grid.clone();
    t_grid.sort_by(f64::total_cmp);
    t_grid.dedup();

    let (done, mut failures) = run_trials(config.jobs, config.trials, |trial| {
        let state = FlowState::new(sample_matrix(&config.ensemble, trial)?, 0.0);
        t_grid
            .iter()
            .map(|&t| Ok(eigenvalues(&dyson_flow_at(&state.at(t))?)?.lambdas[0]))
            .collect::<Result<Vec<f64>>>()
    })?;
    let mut records = Vec::with_capacity(done.len() * t_grid.len());
    for (trial, l1) in &done {
        for (&t, &lambda1) in t_grid.iter().zip(l1) {
            records.push(FlowRecord { trial: *trial, t, lambda1 });
        }
    }

    let mut points = Vec::with_capacity(t_grid.len());
    for (k, &t) in t_grid.iter().enumerate() {
        let l1: Vec<f64> = done.iter().map(|(_, v)| v[k]).collect();
        let law = base.with_t(t)?;
        let edges = edge_report(&law)?;
        points.push(FlowPoint {
            t,
            mean_lambda1: mean(&l1),
            std_err_lambda1: std_err(&l1),
            l_newton: edges.l_plus,
            l_asym: edges.l_plus_asym,
            l_dot: edges.ldot,
        });
    }

    let gaussian = EnsembleParams::gaussian(config.ensemble.n, config.ensemble.m, config.ensemble.seed)?;
    let (g_done, g_failures) = run_trials(config.jobs, config.trials, |trial| {
        Ok(eigenvalues(&sample_matrix(&gaussian, trial)?)?.lambdas[0])
    })?;
    failures.extend(g_failures);
    let g: Vec<f64> = g_done.into_iter().map(|(_, v)| v).collect();
    let (g_mean, g_se) = (mean(&g), std_err(&g));
    let last = points.last().expect("t_grid is nonempty");
    let combined = (last.std_err_lambda1.powi(2) + g_se.powi(2)).sqrt();
    let gap = (last.mean_lambda1 - g_mean).abs();
    let endpoint_z = match (combined > 0.0, gap == 0.0) {
        (true, _) => gap / combined,
        (false, true) => 0.0,
        (false, false) => f64::MAX,
    };

    let th = &config.thresholds;
    let slope_law = if base.q >= th.slope_min_q {
        base
    } else {
        warnings.push(format!(
            "slope check evaluated on the law with q = {} (ensemble q = {:.4} is below the minimum)",
            th.slope_min_q, base.q
        ));
        LawParams::new(base.d, th.slope_min_q, base.s4, 0.0)?
    };
    let slope = slope_check(slope_law)?;

    let mut checks = Vec::new();
    if base.s4 != 0.0 && points.len() > 1 {
        let sign = base.s4.signum();
        // Largest signed step; negative means L_t moves strictly toward λ₊.
        let worst = points.windows(2).map(|w| sign * (w[1].l_newton - w[0].l_newton)).fold(f64::NEG_INFINITY, f64::max);
        checks.push(Check::below("edge_monotone_step", worst, 0.0));
    } else {
        warnings.push("s4 = 0: L_t is constant, monotonicity not checked".into());
    }
    checks.push(Check::at_most("slope_rel_error", slope.rel_error, th.slope_rel_tol));
    let t_end = 6.0 * (config.ensemble.n as f64).ln();
    if (last.t - t_end).abs() <= 1e-9 * t_end {
        checks.push(Check::at_most("endpoint_std_errs", endpoint_z, th.endpoint_se));
    } else {
        warnings.push(format!("t_grid does not reach 6 log N = {t_end}; endpoint not checked"));
    }

    let summary = FlowSummary {
        points,
        slope,
        gaussian_mean_lambda1: g_mean,
        gaussian_std_err_lambda1: g_se,
        gaussian_trials: g.len(),
        endpoint_z,
    };
    Ok(Report {
        header: ReportHeader::new(ExperimentKind::Flow),
        config: config.clone(),
        summary,
        checks,
        warnings,
        failures,
        records,
    })
}
