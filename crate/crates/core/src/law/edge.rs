//! Spectral edges of the corrected law.
//!
//! An edge `L` is a point where two real roots of `P_L` merge, i.e. a
//! solution `(w, L)` of `P(w, L) = 0`, `∂_w P(w, L) = 0`. It is found by
//! Newton's method in the pair `(w, L)` started from the Marchenko–Pastur
//! edge `(−1/(1 ± 1/√d), λ±)`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::mp::mp_edges;
use super::quartic;
use super::LawParams;
use crate::error::{Error, Result};

/// Newton stops once `max(|P|, |∂_w P|)` drops below this.
pub const NEWTON_TOL: f64 = 1e-12;
pub const NEWTON_MAX_ITERS: usize = 50;

/// Constant `C` in `|L₊ − L₊(asymptotic)| ≤ C e^{-2t} q_t^{-4}`.
pub const REMAINDER_CONSTANT: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EdgeSide {
    Plus,
    Minus,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeSolve {
    pub side: EdgeSide,
    /// Critical point: the double root of `P_L`.
    pub tau: f64,
    pub location: f64,
    pub iterations: usize,
    pub residual: f64,
}

/// Leading-order edge expansions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EdgeAsymptotic {
    pub l_plus: f64,
    /// `None` for `d = 1`, where no corrected lower edge is available.
    pub l_minus: Option<f64>,
    /// `dL_t/dt`.
    pub l_dot: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeReport {
    pub params: LawParams,
    pub tau: f64,
    pub l_plus: f64,
    pub l_minus: Option<f64>,
    pub tau_minus: Option<f64>,
    pub l_plus_asym: f64,
    pub l_minus_asym: Option<f64>,
    pub ldot: f64,
    pub lambda_plus: f64,
    pub lambda_minus: f64,
    pub newton_iters: usize,
    pub newton_residual: f64,
    pub remainder_constant: f64,
}

impl EdgeReport {
    /// Lower end of the absolutely continuous support (0 for `d = 1`).
    pub fn support_lo(&self) -> f64 {
        self.l_minus.unwrap_or(0.0)
    }
}

fn real(x: f64) -> Complex64 {
    Complex64::new(x, 0.0)
}

/// Solves the edge system for one side.
pub fn edge_newton(params: &LawParams, side: EdgeSide) -> Result<EdgeSolve> {
    params.validate()?;
    let d = params.d;
    if side == EdgeSide::Minus && d <= 1.0 {
        return Err(Error::param("the lower edge is defined only for d > 1"));
    }
    let a = params.a();
    let c = params.c4();
    let r = 1.0 / d.sqrt();
    let (lm, lp) = mp_edges(d);
    let (mut w, mut l) = match side {
        EdgeSide::Plus => (-1.0 / (1.0 + r), lp),
        EdgeSide::Minus => (-1.0 / (1.0 - r), lm),
    };

    let residual_at = |w: f64, l: f64| {
        let p = quartic::eval(real(w), real(l), a, c).re;
        let pw = quartic::d_w(real(w), real(l), a, c).re;
        (p, pw)
    };

    let mut trajectory = vec![(w, l)];
    let (mut p, mut pw) = residual_at(w, l);
    let mut iterations = 0;
    while p.abs().max(pw.abs()) >= NEWTON_TOL {
        if iterations == NEWTON_MAX_ITERS {
            return Err(Error::Convergence {
                iterations,
                residual: p.abs().max(pw.abs()),
                trajectory,
            });
        }
        // Jacobian of (P, P_w) with respect to (w, L).
        let j11 = pw;
        let j12 = quartic::d_z(real(w), real(l), a, c).re;
        let j21 = quartic::d_ww(real(w), real(l), a, c).re;
        let j22 = quartic::d_wz(real(w), real(l), a, c).re;
        let det = j11 * j22 - j12 * j21;
        if det == 0.0 || !det.is_finite() {
            return Err(Error::Convergence {
                iterations,
                residual: p.abs().max(pw.abs()),
                trajectory,
            });
        }
        let dw = (p * j22 - j12 * pw) / det;
        let dl = (j11 * pw - j21 * p) / det;
        w -= dw;
        l -= dl;
        trajectory.push((w, l));
        (p, pw) = residual_at(w, l);
        iterations += 1;
    }
    Ok(EdgeSolve { side, tau: w, location: l, iterations, residual: p.abs().max(pw.abs()) })
}

/// Leading-order expansions of `L₊`, `L₋` and `L̇_t`.
pub fn edge_asymptotic(params: &LawParams) -> Result<EdgeAsymptotic> {
    params.validate()?;
    let r = 1.0 / params.d.sqrt();
    let c = params.c4();
    let l_plus = (1.0 + r).powi(2) + r * (1.0 + r).powi(2) * c;
    let l_minus = (params.d > 1.0).then(|| (1.0 - r).powi(2) - r * (1.0 - r).powi(2) * c);
    let l_dot = -2.0 * r * (1.0 + r).powi(2) * c;
    Ok(EdgeAsymptotic { l_plus, l_minus, l_dot })
}

/// Newton edges and expansions together.
pub fn edge_report(params: &LawParams) -> Result<EdgeReport> {
    let plus = edge_newton(params, EdgeSide::Plus)?;
    let minus = if params.d > 1.0 { Some(edge_newton(params, EdgeSide::Minus)?) } else { None };
    let asym = edge_asymptotic(params)?;
    let (lm, lp) = mp_edges(params.d);
    Ok(EdgeReport {
        params: *params,
        tau: plus.tau,
        l_plus: plus.location,
        l_minus: minus.as_ref().map(|m| m.location),
        tau_minus: minus.as_ref().map(|m| m.tau),
        l_plus_asym: asym.l_plus,
        l_minus_asym: asym.l_minus,
        ldot: asym.l_dot,
        lambda_plus: lp,
        lambda_minus: lm,
        newton_iters: plus.iterations + minus.as_ref().map_or(0, |m| m.iterations),
        newton_residual: plus.residual.max(minus.as_ref().map_or(0.0, |m| m.residual)),
        remainder_constant: REMAINDER_CONSTANT,
    })
}

/// Inverse map `z = Q(w)`: the root of `P(w, z) = 0`, viewed as a quadratic in
/// `z`, that stays finite as `c₄ → 0`. For `c₄ = 0` this is
/// `−(1 + a w)/(w + w²)`. The upper edge is the minimum of `Q` on `(−1, 0)`.
pub fn inverse_map(w: f64, params: &LawParams) -> Option<f64> {
    let a = params.a();
    let c = params.c4();
    let qa = c * w.powi(4);
    let qb = w + w * w + 2.0 * a * c * w.powi(3);
    let qc = 1.0 + a * w + c * a * a * w * w;
    if qa == 0.0 {
        return (qb != 0.0).then(|| -qc / qb);
    }
    let disc = qb * qb - 4.0 * qa * qc;
    if disc < 0.0 {
        return None;
    }
    let denom = -qb - qb.signum() * disc.sqrt();
    (denom != 0.0).then(|| 2.0 * qc / denom)
}
