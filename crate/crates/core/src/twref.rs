//! GOE Tracy–Widom reference sample.
//!
//! Draws come from the largest eigenvalue of the β = 1 tridiagonal Hermite
//! model: diagonal `N(0, 2)`, off-diagonal `χ_{n-1}, …, χ_1`. Its spectrum
//! fills `[−2√n, 2√n]` and `n^{1/6}(λ_max − 2√n)` converges to F₁.

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use crc::{Crc, CRC_64_XZ};
use rand::Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{stream, Purpose};

pub const MIN_INTERNAL_DIM: usize = 200;
pub const DEFAULT_INTERNAL_DIM: usize = 10_000;
pub const DEFAULT_COUNT: usize = 200_000;
const EIGEN_TOL: f64 = 1e-10;
const MAGIC: &[u8; 4] = b"TWR2";
const VERSION: u32 = 1;
const CRC64: Crc<u64> = Crc::<u64>::new(&CRC_64_XZ);

/// Number of eigenvalues of the symmetric tridiagonal matrix below `x`.
fn count_below(diag: &[f64], off_sq: &[f64], x: f64) -> usize {
    let mut count = 0;
    let mut d = 1.0;
    for (i, &a) in diag.iter().enumerate() {
        let b2 = if i == 0 { 0.0 } else { off_sq[i - 1] };
        d = a - x - if b2 == 0.0 { 0.0 } else { b2 / d };
        if d == 0.0 {
            d = f64::MIN_POSITIVE;
        }
        if d < 0.0 {
            count += 1;
        }
    }
    count
}

/// Largest eigenvalue by bisection, starting from a window of width
/// `2 w n^{-1/6}` around `2√n` that is widened until it brackets.
fn largest_eigenvalue(diag: &[f64], off_sq: &[f64]) -> Result<f64> {
    let n = diag.len();
    let nf = n as f64;
    let center = 2.0 * nf.sqrt();
    let scale = nf.powf(-1.0 / 6.0);
    let mut width = 10.0 * scale;
    let (mut lo, mut hi) = (center - width, center + width);
    let mut tries = 0;
    while !(count_below(diag, off_sq, lo) < n && count_below(diag, off_sq, hi) == n) {
        width *= 2.0;
        lo = center - width;
        hi = center + width;
        tries += 1;
        if tries > 60 {
            return Err(Error::Numerical("could not bracket the largest eigenvalue".into()));
        }
    }
    for _ in 0..200 {
        if hi - lo <= EIGEN_TOL {
            return Ok(0.5 * (lo + hi));
        }
        let mid = 0.5 * (lo + hi);
        if count_below(diag, off_sq, mid) == n {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Err(Error::Numerical(format!("bisection stalled at width {:e}", hi - lo)))
}

/// One rescaled draw `n'^{1/6}(λ_max − 2√n')` with `n' = n − 1/2`, which
/// removes the leading finite-n shift of the mean.
pub fn sample_tw1<R: Rng + ?Sized>(n_internal: usize, rng: &mut R) -> Result<f64> {
    if n_internal < MIN_INTERNAL_DIM {
        return Err(Error::param(format!("n_internal must be >= {MIN_INTERNAL_DIM}, got {n_internal}")));
    }
    let n = n_internal;
    let sqrt2 = std::f64::consts::SQRT_2;
    let diag: Vec<f64> = (0..n)
        .map(|_| {
            let z: f64 = StandardNormal.sample(rng);
            sqrt2 * z
        })
        .collect();
    // χ_k² = Gamma(k/2, scale 2)
    let mut off_sq = Vec::with_capacity(n - 1);
    for k in (1..n).rev() {
        let gamma = Gamma::new(k as f64 / 2.0, 2.0).map_err(|e| Error::Numerical(e.to_string()))?;
        off_sq.push(gamma.sample(rng));
    }
    let lambda = largest_eigenvalue(&diag, &off_sq)?;
    let nf = n as f64 - 0.5;
    Ok(nf.powf(1.0 / 6.0) * (lambda - 2.0 * nf.sqrt()))
}

/// Draw `index` of the reference with master seed `seed`.
pub fn reference_draw(n_internal: usize, seed: u64, index: u64) -> Result<f64> {
    let mut rng = stream(seed, index, Purpose::TracyWidom);
    sample_tw1(n_internal, &mut rng)
}

/// Sorted reference sample with its build parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TwReference {
    pub samples: Vec<f64>,
    pub n_internal: usize,
    pub seed: u64,
}

impl TwReference {
    pub fn count(&self) -> usize {
        self.samples.len()
    }

    /// Fraction of draws `≤ x`.
    pub fn ecdf(&self, x: f64) -> f64 {
        ecdf(&self.samples, x)
    }

    pub fn mean(&self) -> f64 {
        self.samples.iter().sum::<f64>() / self.count() as f64
    }

    pub fn variance(&self) -> f64 {
        let m = self.mean();
        self.samples.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (self.count() as f64 - 1.0)
    }

    pub fn median(&self) -> f64 {
        let n = self.count();
        if n % 2 == 1 {
            self.samples[n / 2]
        } else {
            0.5 * (self.samples[n / 2 - 1] + self.samples[n / 2])
        }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(32 + 8 * self.count() + 8);
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&(self.n_internal as u64).to_le_bytes());
        out.extend_from_slice(&(self.count() as u64).to_le_bytes());
        out.extend_from_slice(&self.seed.to_le_bytes());
        for x in &self.samples {
            out.extend_from_slice(&x.to_le_bytes());
        }
        let crc = CRC64.checksum(&out);
        out.extend_from_slice(&crc.to_le_bytes());
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let corrupt = |msg: &str| Error::Cache(format!("{msg}; rebuild required"));
        if bytes.len() < 40 || &bytes[..4] != MAGIC {
            return Err(corrupt("not a reference cache"));
        }
        let (body, tail) = bytes.split_at(bytes.len() - 8);
        let stored = u64::from_le_bytes(tail.try_into().unwrap());
        if CRC64.checksum(body) != stored {
            return Err(corrupt("checksum mismatch"));
        }
        let u32_at = |i: usize| u32::from_le_bytes(body[i..i + 4].try_into().unwrap());
        let u64_at = |i: usize| u64::from_le_bytes(body[i..i + 8].try_into().unwrap());
        if u32_at(4) != VERSION {
            return Err(corrupt(&format!("unsupported version {}", u32_at(4))));
        }
        let n_internal = u64_at(8) as usize;
        let count = u64_at(16) as usize;
        let seed = u64_at(24);
        if body.len() != 32 + 8 * count {
            return Err(corrupt("length does not match the recorded count"));
        }
        let samples: Vec<f64> =
            body[32..].chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
        if samples.windows(2).any(|w| !(w[0] <= w[1])) {
            return Err(corrupt("samples are not sorted"));
        }
        Ok(Self { samples, n_internal, seed })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        if let Some(dir) = path.parent() {
            if !dir.as_os_str().is_empty() {
                fs::create_dir_all(dir)?;
            }
        }
        let tmp = path.with_extension("tmp");
        fs::File::create(&tmp)?.write_all(&self.to_bytes())?;
        fs::rename(&tmp, path)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let mut bytes = Vec::new();
        fs::File::open(path)?.read_to_end(&mut bytes)?;
        Self::from_bytes(&bytes)
    }
}

/// `count` draws in parallel on the current rayon pool, sorted ascending.
pub fn build_reference(count: usize, n_internal: usize, seed: u64) -> Result<TwReference> {
    if count == 0 {
        return Err(Error::param("count must be at least 1"));
    }
    if n_internal < MIN_INTERNAL_DIM {
        return Err(Error::param(format!("n_internal must be >= {MIN_INTERNAL_DIM}, got {n_internal}")));
    }
    let mut samples = (0..count as u64)
        .into_par_iter()
        .map(|i| reference_draw(n_internal, seed, i))
        .collect::<Result<Vec<f64>>>()?;
    samples.sort_by(f64::total_cmp);
    Ok(TwReference { samples, n_internal, seed })
}

/// How a reference was obtained by [`load_or_build`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CacheStatus {
    Hit,
    Built,
    /// The file existed but was corrupt or built with other parameters.
    Rebuilt,
}

/// Loads the cache at `path` if it matches `(count, n_internal, seed)`,
/// otherwise builds the reference and writes it there.
pub fn load_or_build(path: &Path, count: usize, n_internal: usize, seed: u64) -> Result<(TwReference, CacheStatus)> {
    let status = if path.exists() {
        match TwReference::load(path) {
            Ok(r) if r.count() == count && r.n_internal == n_internal && r.seed == seed => {
                return Ok((r, CacheStatus::Hit))
            }
            _ => CacheStatus::Rebuilt,
        }
    } else {
        CacheStatus::Built
    };
    let r = build_reference(count, n_internal, seed)?;
    r.save(path)?;
    Ok((r, status))
}

/// Empirical CDF of a sorted sample at `x`.
pub fn ecdf(sorted: &[f64], x: f64) -> f64 {
    if sorted.is_empty() {
        return 0.0;
    }
    sorted.partition_point(|&v| v <= x) as f64 / sorted.len() as f64
}

/// Two-sample Kolmogorov–Smirnov distance of two sorted samples.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::param("KS distance needs nonempty samples"));
    }
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut worst = 0.0f64;
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        worst = worst.max((i as f64 / na - j as f64 / nb).abs());
    }
    // Once one sample is exhausted its ECDF is 1, so the gap only shrinks.
    Ok(worst)
}

/// KS distance between a sorted sample and the reference.
pub fn ks_distance(samples: &[f64], reference: &TwReference) -> Result<f64> {
    ks_two_sample(samples, &reference.samples)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sturm_count_on_known_matrix() {
        // tridiag(2; -1) of size 4: eigenvalues 2 - 2cos(kπ/5)
        let diag = [2.0; 4];
        let off_sq = [1.0; 3];
        let eig: Vec<f64> = (1..=4).map(|k| 2.0 - 2.0 * (k as f64 * std::f64::consts::PI / 5.0).cos()).collect();
        assert_eq!(count_below(&diag, &off_sq, 0.0), 0);
        assert_eq!(count_below(&diag, &off_sq, eig[1] + 1e-9), 2);
        assert_eq!(count_below(&diag, &off_sq, 5.0), 4);
    }

    #[test]
    fn draws_are_deterministic() {
        let a = reference_draw(300, 7, 3).unwrap();
        let b = reference_draw(300, 7, 3).unwrap();
        let c = reference_draw(300, 7, 4).unwrap();
        assert_eq!(a.to_bits(), b.to_bits());
        assert_ne!(a, c);
        assert!(reference_draw(100, 7, 3).is_err());
    }

    #[test]
    fn ks_examples() {
        let r = TwReference { samples: vec![1.0, 2.0, 3.0, 4.0], n_internal: 200, seed: 0 };
        assert_eq!(ks_distance(&r.samples, &r).unwrap(), 0.0);
        assert_eq!(ks_distance(&[2.5], &r).unwrap(), 0.5);
        assert_eq!(ks_two_sample(&[0.0, 0.5], &[7.0, 8.0]).unwrap(), 1.0);
        assert!(ks_two_sample(&[], &[1.0]).is_err());
    }

    #[test]
    fn ties_are_handled() {
        assert_eq!(ks_two_sample(&[1.0, 1.0, 2.0], &[1.0, 2.0, 2.0]).unwrap(), 1.0 / 3.0);
    }

    #[test]
    fn corrupt_cache_detected() {
        let r = TwReference { samples: vec![-1.5, -1.0, 0.25], n_internal: 400, seed: 9 };
        let mut bytes = r.to_bytes();
        assert_eq!(TwReference::from_bytes(&bytes).unwrap(), r);
        bytes[40] ^= 1;
        assert!(matches!(TwReference::from_bytes(&bytes), Err(Error::Cache(_))));
    }
}
