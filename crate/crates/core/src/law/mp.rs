//! Marchenko–Pastur Stieltjes transform and edges.

use num_complex::Complex64;

use crate::error::{Error, Result};

/// `λ± = (1 ± 1/√d)²`.
pub fn mp_edges(d: f64) -> (f64, f64) {
    let r = 1.0 / d.sqrt();
    ((1.0 - r).powi(2), (1.0 + r).powi(2))
}

/// Stieltjes transform of the Marchenko–Pastur law (atom `1 - 1/d` at zero
/// included), the root of `1 + (z + 1 - 1/d) m + z m² = 0` with `Im m > 0` on
/// the upper half-plane.
///
/// The square root is evaluated as `√(z-λ₊)·√(z-λ₋)` with principal branches,
/// which is analytic off `[λ₋, λ₊]` and gives the boundary value from above
/// for real `z`.
pub fn mp_stieltjes(z: Complex64, d: f64) -> Result<Complex64> {
    if z == Complex64::new(0.0, 0.0) {
        return Err(Error::Domain("m_MP has a pole at z = 0".into()));
    }
    if !(d >= 1.0) {
        return Err(Error::param(format!("aspect ratio d must be >= 1, got {d}")));
    }
    // Normalize -0.0 so the principal branch is the limit from above.
    let z = Complex64::new(z.re, z.im + 0.0);
    let a = 1.0 - 1.0 / d;
    let (lm, lp) = mp_edges(d);
    let root = (z - lp).sqrt() * (z - lm).sqrt();
    let b = -(z + a);
    let plus = b + root;
    let minus = b - root;
    // Avoid cancellation: the product of the two roots is 1/z.
    let m = if plus.norm() >= minus.norm() {
        plus / (2.0 * z)
    } else {
        let other = minus / (2.0 * z);
        1.0 / (z * other)
    };
    Ok(m)
}
