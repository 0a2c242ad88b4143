//! The sparsity-corrected Marchenko–Pastur law.
//!
//! The corrected Stieltjes transform `w(z)` is the root of the quartic
//! [`quartic::eval`] with coefficient `c₄ = e^{-2t} s⁴ / q²` that lies in the
//! upper half-plane and continues the Marchenko–Pastur branch. Everything
//! else (density, edges, classical locations) is derived from it.

pub mod derived;
pub mod edge;
pub mod integrate;
pub mod mp;
pub mod quadrature;
pub mod quartic;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::ensemble::{cumulant_profile, EnsembleParams};
use crate::error::{Error, Result};

pub use derived::{law_derived, LawDerived};
pub use edge::{edge_asymptotic, edge_newton, edge_report, EdgeAsymptotic, EdgeReport, EdgeSide, EdgeSolve};
pub use integrate::{ac_mass, classical_location, classical_locations, integrated_density, upper_quantile};
pub use mp::{mp_edges, mp_stieltjes};

/// Largest `|c₄|` for which the quartic is treated as a perturbation of the
/// Marchenko–Pastur quadratic.
pub const C4_CEILING: f64 = 0.1;

/// Residual bound `|P_z(w)|` every returned solution satisfies.
pub const RESIDUAL_TOL: f64 = 1e-10;

/// Lowest energy accepted by [`density`] when `d = 1`.
pub const HARD_EDGE_FLOOR: f64 = 1e-2;

/// Parameters of the corrected law.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LawParams {
    /// Aspect ratio `d = N/M ≥ 1`.
    pub d: f64,
    /// Sparsity parameter at `t = 0`.
    pub q: f64,
    /// Normalized fourth cumulant at `t = 0`.
    pub s4: f64,
    /// Flow time.
    pub t: f64,
}

impl LawParams {
    pub fn new(d: f64, q: f64, s4: f64, t: f64) -> Result<Self> {
        let params = Self { d, q, s4, t };
        params.validate()?;
        Ok(params)
    }

    /// Law matching an ensemble: `d = N/M`, exact `s⁴` of its entry law.
    pub fn from_ensemble(ensemble: &EnsembleParams, t: f64) -> Result<Self> {
        let profile = cumulant_profile(ensemble, 0.0, 4)?;
        Self::new(ensemble.d(), ensemble.q, profile.s4(), t)
    }

    /// Plain Marchenko–Pastur (`s⁴ = 0`).
    pub fn marchenko_pastur(d: f64) -> Result<Self> {
        Self::new(d, 1.0, 0.0, 0.0)
    }

    pub fn with_t(self, t: f64) -> Result<Self> {
        Self::new(self.d, self.q, self.s4, t)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.d >= 1.0 && self.d.is_finite()) {
            return Err(Error::param(format!("aspect ratio d must be >= 1, got {}", self.d)));
        }
        if !(self.q > 0.0 && self.q.is_finite()) {
            return Err(Error::param(format!("q must be positive, got {}", self.q)));
        }
        if !(self.t >= 0.0 && self.t.is_finite()) {
            return Err(Error::param(format!("flow time must be >= 0, got {}", self.t)));
        }
        if !self.s4.is_finite() {
            return Err(Error::param("s4 must be finite"));
        }
        let c4 = self.c4();
        if c4.abs() >= C4_CEILING {
            return Err(Error::param(format!(
                "|c4| = |e^(-2t) s4 / q^2| = {} is outside the perturbative regime (< {C4_CEILING})",
                c4.abs()
            )));
        }
        Ok(())
    }

    /// `a = 1 - 1/d`.
    pub fn a(&self) -> f64 {
        1.0 - 1.0 / self.d
    }

    /// Effective quartic coefficient `s_t⁴ / q_t² = e^{-2t} s⁴ / q²`.
    pub fn c4(&self) -> f64 {
        (-2.0 * self.t).exp() * self.s4 / (self.q * self.q)
    }

    /// `q_t = q e^{t/2}`.
    pub fn q_t(&self) -> f64 {
        self.q * (0.5 * self.t).exp()
    }

    /// Radius of the disk in which the Stieltjes branch is unique.
    pub fn disk_radius(&self) -> f64 {
        if self.d > 1.0 {
            let (lm, lp) = mp_edges(self.d);
            6.0 * lp / lm
        } else {
            10.0
        }
    }

    pub fn domain(&self) -> SpectralDomain {
        SpectralDomain::for_ratio(self.d)
    }
}

/// The spectral domain `E_lo ≤ E ≤ E_hi`, `0 < η < 3`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectralDomain {
    pub e_lo: f64,
    pub e_hi: f64,
    pub eta_lo: f64,
    pub eta_hi: f64,
}

impl SpectralDomain {
    pub fn for_ratio(d: f64) -> Self {
        let (lm, lp) = mp_edges(d);
        let e_lo = if d > 1.0 { lm / 2.0 } else { 0.1 };
        Self { e_lo, e_hi: lp + 1.0, eta_lo: 0.0, eta_hi: 3.0 }
    }

    pub fn contains(&self, z: Complex64) -> bool {
        z.re >= self.e_lo && z.re <= self.e_hi && z.im > self.eta_lo && z.im < self.eta_hi
    }

    /// `n_e × n_eta` grid: energies evenly spaced over `[E_lo, E_hi]`,
    /// η log-spaced over `[eta_min, eta_max]`. Ordered by energy, then by
    /// increasing η.
    pub fn grid(&self, n_e: usize, n_eta: usize, eta_min: f64, eta_max: f64) -> Vec<Complex64> {
        let energies = linspace(self.e_lo, self.e_hi, n_e);
        let etas = logspace(eta_min, eta_max, n_eta);
        energies
            .iter()
            .flat_map(|&e| etas.iter().map(move |&eta| Complex64::new(e, eta)))
            .collect()
    }
}

pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect(),
    }
}

pub fn logspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    linspace(lo.ln(), hi.ln(), n).into_iter().map(f64::exp).collect()
}

/// The Stieltjes-branch root of `P_z` with diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LawSolution {
    pub z: Complex64,
    pub w: Complex64,
    pub residual: f64,
    pub all_roots: Vec<Complex64>,
    /// Roots that passed the half-plane and disk filters.
    pub candidates: usize,
    /// Set when two candidates were equally close to `m_MP` and the
    /// continuation hint decided.
    pub tie_broken_by_hint: bool,
}

/// Solves `P_z(w) = 0` for the Stieltjes branch.
pub fn solve_self_consistent(z: Complex64, params: &LawParams) -> Result<LawSolution> {
    solve_with_hint(z, params, None)
}

/// As [`solve_self_consistent`]; `hint` (typically the solution at the
/// previous grid point) breaks numerical ties between candidates.
pub fn solve_with_hint(z: Complex64, params: &LawParams, hint: Option<Complex64>) -> Result<LawSolution> {
    solve_within(z, params, hint, params.disk_radius())
}

fn solve_within(z: Complex64, params: &LawParams, hint: Option<Complex64>, radius: f64) -> Result<LawSolution> {
    params.validate()?;
    if !(z.im >= 0.0) || !z.re.is_finite() || !z.im.is_finite() {
        return Err(Error::Domain(format!("z = {z} must lie in the closed upper half-plane")));
    }
    let z = Complex64::new(z.re, z.im + 0.0);
    let a = params.a();
    let c = params.c4();
    let m_ref = mp::mp_stieltjes(z, params.d)?;

    if c == 0.0 {
        let other = 1.0 / (z * m_ref);
        return Ok(LawSolution {
            z,
            w: m_ref,
            residual: quartic::eval(m_ref, z, a, 0.0).norm(),
            all_roots: vec![m_ref, other],
            candidates: 1,
            tie_broken_by_hint: false,
        });
    }

    let all_roots = quartic::roots(&quartic::coefficients(z, a, c));
    let upper = z.im > 0.0;
    let admissible = |w: &Complex64| {
        let side = if upper { w.im > 0.0 } else { w.im >= 0.0 };
        side && w.norm() <= radius
    };
    let mut cands: Vec<(f64, Complex64)> = all_roots
        .iter()
        .filter(|w| admissible(w))
        .map(|&w| ((w - m_ref).norm(), w))
        .collect();
    if cands.is_empty() {
        return Err(Error::Branch { z, roots: all_roots });
    }
    cands.sort_by(|x, y| x.0.total_cmp(&y.0));
    let mut w = cands[0].1;
    let mut tie = false;
    if let (Some(h), Some(second)) = (hint, cands.get(1)) {
        let gap = second.0 - cands[0].0;
        if gap <= 1e-9 * (1.0 + cands[0].0) && (second.1 - h).norm() < (w - h).norm() {
            w = second.1;
            tie = true;
        }
    }
    let residual = quartic::eval(w, z, a, c).norm();
    if !(residual <= RESIDUAL_TOL) {
        return Err(Error::Numerical(format!(
            "root residual {residual:e} at z = {z} exceeds {RESIDUAL_TOL:e}"
        )));
    }
    Ok(LawSolution { z, w, residual, all_roots, candidates: cands.len(), tie_broken_by_hint: tie })
}

/// Density `ρ̃_t(E)`, the boundary value `Im w(E + i0)/π`.
///
/// Energies below [`HARD_EDGE_FLOOR`] are refused for `d = 1`.
pub fn density(e: f64, params: &LawParams) -> Result<f64> {
    if !e.is_finite() {
        return Err(Error::Domain("energy must be finite".into()));
    }
    if params.d == 1.0 && e < HARD_EDGE_FLOOR {
        return Err(Error::Domain(format!(
            "E = {e} is below the hard-edge floor {HARD_EDGE_FLOOR} for d = 1"
        )));
    }
    if e == 0.0 {
        return Err(Error::Domain("E = 0 carries the atom of the law".into()));
    }
    density_raw(e, params)
}

/// Density without the hard-edge floor; used by quadrature down to `E → 0⁺`.
pub(crate) fn density_raw(e: f64, params: &LawParams) -> Result<f64> {
    if e <= 0.0 {
        return Ok(0.0);
    }
    // For d = 1 the branch grows like E^{-1/2} at the hard edge and leaves
    // the disk; proximity to m_MP alone still identifies it.
    let radius = if params.d == 1.0 && e < HARD_EDGE_FLOOR { f64::INFINITY } else { params.disk_radius() };
    let sol = solve_within(Complex64::new(e, 0.0), params, None, radius)?;
    Ok(sol.w.im.max(0.0) / std::f64::consts::PI)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn params_validation() {
        assert!(LawParams::new(0.5, 10.0, 1.0, 0.0).is_err());
        assert!(LawParams::new(1.0, 0.0, 1.0, 0.0).is_err());
        assert!(LawParams::new(1.0, 10.0, 1.0, -1.0).is_err());
        // c4 = 1/9 > 0.1
        assert!(LawParams::new(1.0, 3.0, 1.0, 0.0).is_err());
        // flowing long enough brings it into range
        assert!(LawParams::new(1.0, 3.0, 1.0, 0.5).is_ok());
        let p = LawParams::new(2.0, 10.0, 1.0, 1.0).unwrap();
        assert!((p.c4() - (-2.0f64).exp() / 100.0).abs() < 1e-15);
        assert!((p.q_t() - 10.0 * 0.5f64.exp()).abs() < 1e-12);
    }

    #[test]
    fn domain_bounds() {
        let dom = SpectralDomain::for_ratio(1.0);
        assert_eq!(dom.e_lo, 0.1);
        assert_eq!(dom.e_hi, 5.0);
        let dom = SpectralDomain::for_ratio(4.0);
        assert!((dom.e_lo - 0.125).abs() < 1e-15);
        assert!(dom.contains(Complex64::new(1.0, 0.5)));
        assert!(!dom.contains(Complex64::new(1.0, 3.0)));
        assert_eq!(dom.grid(4, 3, 1e-3, 1.0).len(), 12);
    }

    #[test]
    fn reduces_to_mp_without_correction() {
        let params = LawParams::marchenko_pastur(2.0).unwrap();
        let z = Complex64::new(1.2, 0.3);
        let sol = solve_self_consistent(z, &params).unwrap();
        assert!((sol.w - mp_stieltjes(z, 2.0).unwrap()).norm() < 1e-12);
    }

    #[test]
    fn lower_half_plane_rejected() {
        let params = LawParams::new(1.0, 10.0, 1.0, 0.0).unwrap();
        assert!(solve_self_consistent(Complex64::new(1.0, -0.1), &params).is_err());
    }

    #[test]
    fn density_domain_errors() {
        let params = LawParams::new(1.0, 10.0, 1.0, 0.0).unwrap();
        assert!(density(0.001, &params).is_err());
        assert!(density(-1.0, &params).is_err());
        let params = LawParams::new(2.0, 10.0, 1.0, 0.0).unwrap();
        assert!(density(0.0, &params).is_err());
        assert_eq!(density(-0.5, &params).unwrap(), 0.0);
    }
}
