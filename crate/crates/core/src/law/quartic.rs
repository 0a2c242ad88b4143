//! The self-consistent polynomial
//!
//! ```text
//! P_z(w) = 1 + (z + a) w + z w² + c w² (z w + a)²,   a = 1 - 1/d,
//! ```
//!
//! its derivatives, and a companion-matrix root finder.

use faer::Mat;
use num_complex::Complex64;

/// Coefficients of `P_z` as a polynomial in `w`, lowest degree first.
pub fn coefficients(z: Complex64, a: f64, c: f64) -> [Complex64; 5] {
    let one = Complex64::new(1.0, 0.0);
    [
        one,
        z + a,
        z + c * a * a,
        2.0 * a * c * z,
        c * z * z,
    ]
}

/// `P_z(w)`.
#[inline]
pub fn eval(w: Complex64, z: Complex64, a: f64, c: f64) -> Complex64 {
    let inner = z * w + a;
    1.0 + (z + a) * w + z * w * w + c * w * w * inner * inner
}

/// `∂P/∂w`.
#[inline]
pub fn d_w(w: Complex64, z: Complex64, a: f64, c: f64) -> Complex64 {
    let inner = z * w + a;
    (z + a) + 2.0 * z * w + 2.0 * c * w * inner * (2.0 * z * w + a)
}

/// `∂P/∂z`.
#[inline]
pub fn d_z(w: Complex64, z: Complex64, a: f64, c: f64) -> Complex64 {
    w + w * w + 2.0 * c * w * w * w * (z * w + a)
}

/// `∂²P/∂w²`.
#[inline]
pub fn d_ww(w: Complex64, z: Complex64, a: f64, c: f64) -> Complex64 {
    let zw = z * w;
    2.0 * z + 2.0 * c * ((zw + a) * (2.0 * zw + a) + zw * (2.0 * zw + a) + 2.0 * zw * (zw + a))
}

/// `∂²P/∂w∂z`.
#[inline]
pub fn d_wz(w: Complex64, z: Complex64, a: f64, c: f64) -> Complex64 {
    1.0 + 2.0 * w + 2.0 * c * w * w * (4.0 * z * w + 3.0 * a)
}

fn horner(coeffs: &[Complex64], w: Complex64) -> (Complex64, Complex64) {
    let mut p = Complex64::new(0.0, 0.0);
    let mut dp = Complex64::new(0.0, 0.0);
    for &c in coeffs.iter().rev() {
        dp = dp * w + p;
        p = p * w + c;
    }
    (p, dp)
}

/// Scaling `w = s v` that balances the constant and leading coefficients.
fn balance_scale(coeffs: &[Complex64]) -> f64 {
    let n = coeffs.len() - 1;
    let lead = coeffs[n].norm();
    let constant = coeffs[0].norm();
    if constant == 0.0 || lead == 0.0 {
        return 1.0;
    }
    let s = (constant / lead).powf(1.0 / n as f64);
    if s.is_finite() && s > 0.0 {
        s
    } else {
        1.0
    }
}

fn trim(coeffs: &[Complex64]) -> &[Complex64] {
    let mut end = coeffs.len();
    while end > 1 && coeffs[end - 1] == Complex64::new(0.0, 0.0) {
        end -= 1;
    }
    &coeffs[..end]
}

/// Newton polish: a few steps, each accepted only if it lowers `|P|`.
fn polish(coeffs: &[Complex64], mut w: Complex64) -> Complex64 {
    let (mut p, mut dp) = horner(coeffs, w);
    for _ in 0..4 {
        if p.norm() == 0.0 || dp.norm() == 0.0 {
            break;
        }
        let next = w - p / dp;
        let (pn, dpn) = horner(coeffs, next);
        if pn.norm() < p.norm() {
            w = next;
            p = pn;
            dp = dpn;
        } else {
            break;
        }
    }
    w
}

/// All roots of `Σ coeffs[k] w^k` (lowest degree first).
///
/// Roots are eigenvalues of the companion matrix of the balanced polynomial,
/// followed by Newton polishing. When every coefficient is real the
/// eigenproblem is solved in real arithmetic, so complex roots come in exact
/// conjugate pairs and real roots have zero imaginary part.
pub fn roots(coeffs: &[Complex64]) -> Vec<Complex64> {
    let coeffs = trim(coeffs);
    let n = coeffs.len() - 1;
    if n == 0 {
        return Vec::new();
    }
    let s = balance_scale(coeffs);
    let lead = coeffs[n] * s.powi(n as i32);
    // Monic coefficients b_k of the polynomial in v = w / s.
    let monic: Vec<Complex64> = (0..n).map(|k| coeffs[k] * s.powi(k as i32) / lead).collect();
    let real = coeffs.iter().all(|c| c.im == 0.0);

    let eig: Vec<Complex64> = if n == 1 {
        vec![-monic[0]]
    } else if real {
        let comp = Mat::<f64>::from_fn(n, n, |i, j| {
            if j == n - 1 {
                -monic[i].re
            } else if i == j + 1 {
                1.0
            } else {
                0.0
            }
        });
        match comp.eigenvalues() {
            Ok(ev) => ev,
            Err(_) => return Vec::new(),
        }
    } else {
        let zero = Complex64::new(0.0, 0.0);
        let comp = Mat::<Complex64>::from_fn(n, n, |i, j| {
            if j == n - 1 {
                -monic[i]
            } else if i == j + 1 {
                Complex64::new(1.0, 0.0)
            } else {
                zero
            }
        });
        match comp.eigenvalues() {
            Ok(ev) => ev,
            Err(_) => return Vec::new(),
        }
    };

    eig.into_iter()
        .map(|v| {
            let w = v * s;
            let w = if real && w.im == 0.0 { Complex64::new(w.re, 0.0) } else { w };
            polish(coeffs, w)
        })
        .collect()
}
