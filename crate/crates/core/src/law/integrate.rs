//! Integrated density and classical eigenvalue locations.
//!
//! The density vanishes like a square root at soft edges and diverges like
//! `E^{-1/2}` at the hard edge `E = 0` when `d = 1`. The lower half of the
//! support is integrated in `u = √(E − L₋)` and the upper half in
//! `u = √(L₊ − E)`, which makes the integrand smooth in both cases.

use super::edge::edge_report;
use super::quadrature::integrate;
use super::{density_raw, LawParams};
use crate::error::{Error, Result};

pub const DEFAULT_TOL: f64 = 1e-8;
const MAX_SEGMENTS: usize = 4000;

/// Support `[lo, hi]` of the absolutely continuous part.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Support {
    pub lo: f64,
    pub hi: f64,
}

impl Support {
    pub fn of(params: &LawParams) -> Result<Self> {
        let report = edge_report(params)?;
        Ok(Self { lo: report.support_lo(), hi: report.l_plus })
    }

    fn mid(&self) -> f64 {
        0.5 * (self.lo + self.hi)
    }
}

/// Mass of the atom at zero, `1 − 1/d`.
pub fn atom_mass(params: &LawParams) -> f64 {
    params.a()
}

fn ac_integral(e1: f64, e2: f64, params: &LawParams, support: Support, tol: f64) -> Result<f64> {
    let lo = e1.max(support.lo);
    let hi = e2.min(support.hi);
    if !(lo < hi) {
        return Ok(0.0);
    }
    let mid = support.mid();
    let mut total = 0.0;
    if lo < mid {
        // E = L₋ + u², dE = 2u du
        let top = hi.min(mid);
        let (u0, u1) = ((lo - support.lo).max(0.0).sqrt(), (top - support.lo).max(0.0).sqrt());
        let q = integrate(
            |u| Ok(2.0 * u * density_raw(support.lo + u * u, params)?),
            u0,
            u1,
            0.5 * tol,
            MAX_SEGMENTS,
        )?;
        total += q.value;
    }
    if hi > mid {
        // E = L₊ − u²
        let bottom = lo.max(mid);
        let (u0, u1) = ((support.hi - hi).max(0.0).sqrt(), (support.hi - bottom).max(0.0).sqrt());
        let q = integrate(
            |u| Ok(2.0 * u * density_raw(support.hi - u * u, params)?),
            u0,
            u1,
            0.5 * tol,
            MAX_SEGMENTS,
        )?;
        total += q.value;
    }
    Ok(total)
}

/// `n(E1, E2) = ∫_{(E1, E2]} dρ̃`, including the atom `(1 − 1/d) δ₀` when
/// `0 ∈ (E1, E2]`. Absolute tolerance [`DEFAULT_TOL`].
pub fn integrated_density(e1: f64, e2: f64, params: &LawParams) -> Result<f64> {
    integrated_density_tol(e1, e2, params, DEFAULT_TOL)
}

pub fn integrated_density_tol(e1: f64, e2: f64, params: &LawParams, tol: f64) -> Result<f64> {
    if !(e1 < e2) {
        return Err(Error::param(format!("need E1 < E2 (got {e1}, {e2})")));
    }
    let support = Support::of(params)?;
    let mut mass = ac_integral(e1, e2, params, support, tol)?;
    if params.d > 1.0 && e1 < 0.0 && 0.0 <= e2 {
        mass += atom_mass(params);
    }
    Ok(mass.clamp(0.0, 1.0))
}

/// Mass of the absolutely continuous part over its whole support.
pub fn ac_mass(params: &LawParams, tol: f64) -> Result<f64> {
    let support = Support::of(params)?;
    ac_integral(support.lo, support.hi, params, support, tol)
}

/// Tail mass `∫_{E}^{L₊} ρ̃` on a known support.
fn tail_mass(e: f64, params: &LawParams, support: Support, tol: f64) -> Result<f64> {
    ac_integral(e, support.hi, params, support, tol)
}

/// Classical location `γ_j`: `∫_{γ_j}^{L₊} ρ̃ = j/N` (counted from the top).
pub fn classical_location(j: usize, n: usize, params: &LawParams) -> Result<f64> {
    let support = Support::of(params)?;
    classical_location_on(j, n, params, support)
}

/// `γ_1, …, γ_count`.
pub fn classical_locations(count: usize, n: usize, params: &LawParams) -> Result<Vec<f64>> {
    let support = Support::of(params)?;
    (1..=count).map(|j| classical_location_on(j, n, params, support)).collect()
}

const LOCATION_MASS_TOL: f64 = 1e-10;

fn classical_location_on(j: usize, n: usize, params: &LawParams, support: Support) -> Result<f64> {
    if j == 0 || n == 0 {
        return Err(Error::Index { index: j, reason: "indices start at 1".into() });
    }
    let target = j as f64 / n as f64;
    let ac = 1.0 / params.d;
    if target > ac + 1e-12 {
        return Err(Error::Index {
            index: j,
            reason: format!("j/N = {target} exceeds the continuous mass 1/d = {ac}"),
        });
    }
    upper_quantile_on(target, params, support)
}

/// Energy `E` with `∫_E^{L₊} ρ̃ = mass`, for `0 < mass ≤ 1/d`.
pub fn upper_quantile(mass: f64, params: &LawParams) -> Result<f64> {
    let ac = 1.0 / params.d;
    if !(mass > 0.0 && mass <= ac + 1e-12) {
        return Err(Error::param(format!("mass {mass} outside (0, 1/d]")));
    }
    upper_quantile_on(mass, params, Support::of(params)?)
}

fn upper_quantile_on(target: f64, params: &LawParams, support: Support) -> Result<f64> {
    let ac = 1.0 / params.d;
    let quad_tol = 1e-13;
    // F(E) = tail mass, decreasing from 1/d at lo to 0 at hi.
    let (mut lo, mut hi) = (support.lo, support.hi);
    let mut x = support.hi - (support.hi - support.lo) * target / ac;
    for _ in 0..200 {
        let f = tail_mass(x, params, support, quad_tol)? - target;
        if f.abs() <= LOCATION_MASS_TOL {
            return Ok(x);
        }
        if f > 0.0 {
            lo = x;
        } else {
            hi = x;
        }
        // Newton step dF/dE = −ρ, kept inside the bracket.
        let rho = density_raw(x, params)?;
        let newton = if rho > 0.0 { x + f / rho } else { f64::NAN };
        x = if newton > lo && newton < hi { newton } else { 0.5 * (lo + hi) };
        if hi - lo < 1e-15 * support.hi {
            return Ok(x);
        }
    }
    Err(Error::Numerical(format!("upper quantile for mass {target} did not converge")))
}
