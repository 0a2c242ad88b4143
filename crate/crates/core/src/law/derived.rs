use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::edge::edge_report;
use super::{quartic, solve_self_consistent, LawParams};
use crate::error::{Error, Result};

/// Deterministic control parameters at a spectral point `z = E + iη`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LawDerived {
    pub z: Complex64,
    pub w: Complex64,
    /// `Im w(z)`.
    pub alpha1: f64,
    /// `P'(w(z))`.
    pub alpha2: Complex64,
    /// `1/(Nη) + 1/q_t²`; infinite on the real axis.
    pub beta: f64,
    /// Distance of `E` to the nearest edge of the support.
    pub kappa: f64,
    pub residual: f64,
}

pub fn law_derived(z: Complex64, params: &LawParams, n: usize) -> Result<LawDerived> {
    if n == 0 {
        return Err(Error::param("N must be positive"));
    }
    let sol = solve_self_consistent(z, params)?;
    let edges = edge_report(params)?;
    let e = z.re;
    let kappa = (e - edges.support_lo()).abs().min((e - edges.l_plus).abs());
    let alpha2 = quartic::d_w(sol.w, sol.z, params.a(), params.c4());
    let q_t = params.q_t();
    let beta = 1.0 / (n as f64 * z.im) + 1.0 / (q_t * q_t);
    Ok(LawDerived {
        z: sol.z,
        w: sol.w,
        alpha1: sol.w.im,
        alpha2,
        beta,
        kappa,
        residual: sol.residual,
    })
}
