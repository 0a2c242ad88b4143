//! Spectra and Green-function observables of sampled matrices.

use std::io::Write;

use faer::linalg::solvers::DenseSolveCore;
use faer::{c64, Mat};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::ensemble::{self, MatrixSample};
use crate::error::{Error, Result};

/// Largest `M + N` accepted by the dense diagnostics.
pub const DENSE_CAP: usize = 2000;

/// Eigenvalues of `X†X`, sorted descending.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Spectrum {
    pub lambdas: Vec<f64>,
    /// `N`, the dimension of `X†X`.
    pub n: usize,
    /// `M`, the number of rows of `X`.
    pub m: usize,
}

impl Spectrum {
    /// Builds a spectrum from arbitrary eigenvalues (sorted here).
    pub fn from_values(mut lambdas: Vec<f64>, m: usize) -> Result<Self> {
        if lambdas.iter().any(|l| !l.is_finite()) {
            return Err(Error::Data("non-finite eigenvalue".into()));
        }
        lambdas.sort_by(|a, b| b.total_cmp(a));
        Ok(Self { n: lambdas.len(), lambdas, m })
    }

    pub fn d(&self) -> f64 {
        self.n as f64 / self.m as f64
    }

    /// `λ_j`, 1-based.
    pub fn lambda(&self, j: usize) -> Option<f64> {
        j.checked_sub(1).and_then(|i| self.lambdas.get(i).copied())
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "lambda")?;
        for l in &self.lambdas {
            writeln!(w, "{l:.17e}")?;
        }
        Ok(())
    }

    /// Binary dump as a `1 × N` matrix.
    pub fn write_dump<W: Write>(&self, w: W) -> Result<()> {
        ensemble::write_dump(w, 1, self.n, &self.lambdas)
    }
}

fn check_finite(sample: &MatrixSample) -> Result<()> {
    if let Some(i) = sample.entries.iter().position(|v| !v.is_finite()) {
        return Err(Error::Data(format!(
            "non-finite entry at ({}, {})",
            i / sample.cols,
            i % sample.cols
        )));
    }
    Ok(())
}

/// Squared singular values of `X`, padded with `N − M` zeros.
pub fn eigenvalues(sample: &MatrixSample) -> Result<Spectrum> {
    check_finite(sample)?;
    let (m, n) = (sample.rows, sample.cols);
    let sv = sample
        .to_faer()
        .singular_values()
        .map_err(|e| Error::Numerical(format!("singular value decomposition failed: {e:?}")))?;
    let mut lambdas: Vec<f64> = sv.iter().map(|s| s * s).collect();
    lambdas.resize(n, 0.0);
    lambdas.sort_by(|a, b| b.total_cmp(a));
    Ok(Spectrum { lambdas, n, m })
}

/// `(1/N) Σ 1/(λ_i − z)`.
pub fn empirical_stieltjes(spec: &Spectrum, z: Complex64) -> Complex64 {
    let sum: Complex64 = spec.lambdas.iter().map(|&l| 1.0 / (l - z)).sum();
    sum / spec.n as f64
}

/// Fraction of eigenvalues in `(e1, e2]`.
pub fn counting(spec: &Spectrum, e1: f64, e2: f64) -> Result<f64> {
    if !(e1 < e2) {
        return Err(Error::Parameter(format!("need E1 < E2 (got {e1}, {e2})")));
    }
    let count = spec.lambdas.iter().filter(|&&l| e1 < l && l <= e2).count();
    Ok(count as f64 / spec.n as f64)
}

/// Onatski's statistic `(λ₁ − λ₂)/(λ₂ − λ₃)`.
pub fn onatski_r(spec: &Spectrum) -> Result<f64> {
    let (Some(l1), Some(l2), Some(l3)) = (spec.lambda(1), spec.lambda(2), spec.lambda(3)) else {
        return Err(Error::DegenerateSpectrum("need at least three eigenvalues".into()));
    };
    if !(l2 > l3) {
        return Err(Error::DegenerateSpectrum(format!("λ₂ = λ₃ = {l2}")));
    }
    Ok((l1 - l2) / (l2 - l3))
}

/// Diagonal blocks of the inverse of the linearization
/// `H = [[−z I_N, X†], [X, −I_M]]`.
#[derive(Debug, Clone)]
pub struct GreenBlocks {
    pub z: Complex64,
    /// `N × N` block, equal to `(X†X − z)⁻¹`.
    pub g_tt: Mat<c64>,
    /// `M × M` block, equal to `z (XX† − z)⁻¹`.
    pub g_bar: Mat<c64>,
    /// `(1/N) tr G_TT`.
    pub m: Complex64,
    /// `(1/N) tr G_T̄T̄`.
    pub m_bar: Complex64,
    /// Max entrywise deviation of `G_TT` from the direct resolvent.
    pub schur_residual: f64,
    /// Max entrywise deviation of `G_T̄T̄` from `z (XX† − z)⁻¹`.
    pub schur_residual_bar: f64,
}

impl GreenBlocks {
    /// `|m̄ − (z m + 1 − 1/d)|`.
    pub fn block_trace_residual(&self, d: f64) -> f64 {
        (self.m_bar - (self.z * self.m + 1.0 - 1.0 / d)).norm()
    }
}

fn inverse(a: &Mat<c64>) -> Mat<c64> {
    a.partial_piv_lu().inverse()
}

fn max_abs_diff(a: &Mat<c64>, b: &Mat<c64>) -> f64 {
    let mut worst = 0.0f64;
    for j in 0..a.ncols() {
        for i in 0..a.nrows() {
            worst = worst.max((a[(i, j)] - b[(i, j)]).norm());
        }
    }
    worst
}

fn resolvent_of_gram(gram: &Mat<f64>, z: Complex64) -> Mat<c64> {
    let k = gram.nrows();
    let shifted = Mat::<c64>::from_fn(k, k, |i, j| {
        let g = c64::new(gram[(i, j)], 0.0);
        if i == j {
            g - z
        } else {
            g
        }
    });
    inverse(&shifted)
}

/// Inverts the linearization densely and checks the Schur complement
/// identities against directly computed resolvents.
pub fn linearized_green(sample: &MatrixSample, z: Complex64) -> Result<GreenBlocks> {
    check_finite(sample)?;
    if !(z.im > 0.0) {
        return Err(Error::Domain(format!("z = {z} must have positive imaginary part")));
    }
    let (m, n) = (sample.rows, sample.cols);
    if m + n > DENSE_CAP {
        return Err(Error::Parameter(format!("M + N = {} exceeds the dense cap {DENSE_CAP}", m + n)));
    }
    let x = sample.to_faer();
    let h = Mat::<c64>::from_fn(n + m, n + m, |i, j| match (i < n, j < n) {
        (true, true) => {
            if i == j {
                -z
            } else {
                c64::new(0.0, 0.0)
            }
        }
        (true, false) => c64::new(x[(j - n, i)], 0.0),
        (false, true) => c64::new(x[(i - n, j)], 0.0),
        (false, false) => {
            if i == j {
                c64::new(-1.0, 0.0)
            } else {
                c64::new(0.0, 0.0)
            }
        }
    });
    let g = inverse(&h);
    if (0..n + m).any(|i| !g[(i, i)].re.is_finite() || !g[(i, i)].im.is_finite()) {
        return Err(Error::Numerical("linearization is numerically singular".into()));
    }
    let g_tt = Mat::<c64>::from_fn(n, n, |i, j| g[(i, j)]);
    let g_bar = Mat::<c64>::from_fn(m, m, |i, j| g[(n + i, n + j)]);
    let nn = n as f64;
    let m_t = (0..n).map(|i| g_tt[(i, i)]).sum::<c64>() / nn;
    let m_bar = (0..m).map(|i| g_bar[(i, i)]).sum::<c64>() / nn;

    let direct = resolvent_of_gram(&(x.transpose() * &x), z);
    let mut direct_bar = resolvent_of_gram(&(&x * x.transpose()), z);
    for j in 0..m {
        for i in 0..m {
            direct_bar[(i, j)] *= z;
        }
    }
    let schur_residual = max_abs_diff(&g_tt, &direct);
    let schur_residual_bar = max_abs_diff(&g_bar, &direct_bar);
    Ok(GreenBlocks { z, g_tt, g_bar, m: m_t, m_bar, schur_residual, schur_residual_bar })
}

/// Largest sup-norm over the ℓ²-normalized singular vectors of `X`: the
/// eigenvectors of `XX†` and those of `X†X` for its nonzero spectrum.
pub fn delocalization_stat(sample: &MatrixSample) -> Result<f64> {
    check_finite(sample)?;
    let (m, n) = (sample.rows, sample.cols);
    if m + n > DENSE_CAP {
        return Err(Error::Parameter(format!("M + N = {} exceeds the dense cap {DENSE_CAP}", m + n)));
    }
    let svd = sample
        .to_faer()
        .thin_svd()
        .map_err(|e| Error::Numerical(format!("singular value decomposition failed: {e:?}")))?;
    let sup = |v: faer::MatRef<'_, f64>| {
        let mut worst = 0.0f64;
        for j in 0..v.ncols() {
            let col = v.col(j);
            let norm = col.norm_l2();
            if norm > 0.0 {
                worst = worst.max(col.norm_max() / norm);
            }
        }
        worst
    };
    Ok(sup(svd.U()).max(sup(svd.V())))
}
