//! Sparse random data matrices, the Dyson matrix flow, and entry cumulants.
//!
//! Entries of an `M × N` matrix `X` are i.i.d., centered, with variance exactly
//! `1/N`. The sparse kinds use the two-point law obtained by centering and
//! scaling a Bernoulli(`p`) variable, where `p = q²/N`.

use std::io::{Read, Write};

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{self, Purpose, StreamRng};

/// Entry distribution of the data matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EntryLaw {
    /// Centered and scaled Bernoulli entries: `(1-p)/c` with probability `p`,
    /// `-p/c` otherwise, `c = sqrt(N p (1-p))`.
    SparseBernoulli,
    /// 0/1 biadjacency matrix of a bipartite random graph, together with its
    /// centered/scaled view (which follows the `SparseBernoulli` law).
    BipartiteBiadjacency,
    /// Real Gaussian entries with variance `1/N`.
    Gaussian,
}

impl EntryLaw {
    pub fn is_sparse(self) -> bool {
        !matches!(self, EntryLaw::Gaussian)
    }
}

impl std::str::FromStr for EntryLaw {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "sparse" | "bernoulli" | "sparsebernoulli" | "sparse-bernoulli" => {
                Ok(EntryLaw::SparseBernoulli)
            }
            "biadjacency" | "bipartite" | "bipartitebiadjacency" => {
                Ok(EntryLaw::BipartiteBiadjacency)
            }
            "gaussian" | "normal" => Ok(EntryLaw::Gaussian),
            other => Err(Error::param(format!("unknown entry law '{other}'"))),
        }
    }
}

/// Dimensions, sparsity and seed of an ensemble.
///
/// `n` is the number of columns (the dimension of `X†X`), `m` the number of
/// rows; `d = n/m ≥ 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnsembleParams {
    pub n: usize,
    pub m: usize,
    /// Sparsity parameter `q = sqrt(N p)`. For Gaussian entries this is only
    /// used to report moment bounds and defaults to `sqrt(N)`.
    pub q: f64,
    pub dist: EntryLaw,
    pub seed: u64,
}

impl EnsembleParams {
    pub fn sparse_with_p(n: usize, m: usize, p: f64, seed: u64) -> Result<Self> {
        let params = Self { n, m, q: (n as f64 * p).sqrt(), dist: EntryLaw::SparseBernoulli, seed };
        params.validate()?;
        Ok(params)
    }

    pub fn sparse_with_q(n: usize, m: usize, q: f64, seed: u64) -> Result<Self> {
        let params = Self { n, m, q, dist: EntryLaw::SparseBernoulli, seed };
        params.validate()?;
        Ok(params)
    }

    /// Sparse ensemble with `q = N^phi`.
    pub fn sparse_with_phi(n: usize, m: usize, phi: f64, seed: u64) -> Result<Self> {
        Self::sparse_with_q(n, m, (n as f64).powf(phi), seed)
    }

    pub fn gaussian(n: usize, m: usize, seed: u64) -> Result<Self> {
        let params = Self { n, m, q: (n as f64).sqrt(), dist: EntryLaw::Gaussian, seed };
        params.validate()?;
        Ok(params)
    }

    pub fn with_dist(mut self, dist: EntryLaw) -> Result<Self> {
        self.dist = dist;
        self.validate()?;
        Ok(self)
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    /// Aspect ratio `d = N/M`.
    pub fn d(&self) -> f64 {
        self.n as f64 / self.m as f64
    }

    /// Occupation probability `p = q²/N`.
    pub fn p(&self) -> f64 {
        self.q * self.q / self.n as f64
    }

    /// Sparsity exponent `phi = ln q / ln N`.
    pub fn phi(&self) -> f64 {
        if self.n <= 1 {
            0.5
        } else {
            self.q.ln() / (self.n as f64).ln()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.m == 0 || self.n == 0 {
            return Err(Error::param("dimensions must be positive"));
        }
        if self.n < self.m {
            return Err(Error::param(format!(
                "need N >= M (got N = {}, M = {})",
                self.n, self.m
            )));
        }
        if !(self.q.is_finite() && self.q > 0.0) {
            return Err(Error::param(format!("sparsity q must be positive, got {}", self.q)));
        }
        if self.dist.is_sparse() {
            let p = self.p();
            if !(p > 0.0 && p < 1.0) {
                return Err(Error::param(format!("occupation probability p = {p} not in (0, 1)")));
            }
        }
        Ok(())
    }

    /// The two support points `((1-p)/c, -p/c)` of the sparse entry law.
    pub fn two_point_values(&self) -> (f64, f64) {
        let p = self.p();
        let c = (self.n as f64 * p * (1.0 - p)).sqrt();
        ((1.0 - p) / c, -p / c)
    }
}

/// One sampled `M × N` data matrix, stored dense and row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct MatrixSample {
    pub rows: usize,
    pub cols: usize,
    pub entries: Vec<f64>,
    /// Raw 0/1 entries for biadjacency samples.
    pub raw: Option<Vec<u8>>,
    pub params: EnsembleParams,
    pub trial_index: u64,
}

impl MatrixSample {
    /// Wraps an explicit row-major matrix; `params` only records metadata.
    pub fn from_rows(rows: usize, cols: usize, entries: Vec<f64>, params: EnsembleParams) -> Result<Self> {
        if entries.len() != rows * cols {
            return Err(Error::Data(format!(
                "expected {} entries for a {rows}x{cols} matrix, got {}",
                rows * cols,
                entries.len()
            )));
        }
        Ok(Self { rows, cols, entries, raw: None, params, trial_index: 0 })
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.entries[row * self.cols + col]
    }

    pub fn frobenius_sq(&self) -> f64 {
        self.entries.iter().map(|x| x * x).sum()
    }

    pub fn to_faer(&self) -> faer::Mat<f64> {
        faer::Mat::from_fn(self.rows, self.cols, |i, j| self.get(i, j))
    }

    pub fn write_dump<W: Write>(&self, writer: W) -> Result<()> {
        write_dump(writer, self.rows, self.cols, &self.entries)
    }
}

/// Magic bytes of the binary matrix dump.
pub const DUMP_MAGIC: &[u8; 4] = b"MPSL";
pub const DUMP_VERSION: u32 = 1;

/// Writes `MPSL | version u32 | rows u64 | cols u64 | row-major f64`, all
/// little-endian.
pub fn write_dump<W: Write>(mut writer: W, rows: usize, cols: usize, data: &[f64]) -> Result<()> {
    if data.len() != rows * cols {
        return Err(Error::Data("dump shape does not match data length".into()));
    }
    writer.write_all(DUMP_MAGIC)?;
    writer.write_all(&DUMP_VERSION.to_le_bytes())?;
    writer.write_all(&(rows as u64).to_le_bytes())?;
    writer.write_all(&(cols as u64).to_le_bytes())?;
    for x in data {
        writer.write_all(&x.to_le_bytes())?;
    }
    writer.flush()?;
    Ok(())
}

/// Reads a dump written by [`write_dump`], returning `(rows, cols, data)`.
pub fn read_dump<R: Read>(mut reader: R) -> Result<(usize, usize, Vec<f64>)> {
    let mut magic = [0u8; 4];
    reader.read_exact(&mut magic)?;
    if &magic != DUMP_MAGIC {
        return Err(Error::Data("bad magic in matrix dump".into()));
    }
    let mut b4 = [0u8; 4];
    reader.read_exact(&mut b4)?;
    let version = u32::from_le_bytes(b4);
    if version != DUMP_VERSION {
        return Err(Error::Data(format!("unsupported dump version {version}")));
    }
    let mut b8 = [0u8; 8];
    reader.read_exact(&mut b8)?;
    let rows = u64::from_le_bytes(b8) as usize;
    reader.read_exact(&mut b8)?;
    let cols = u64::from_le_bytes(b8) as usize;
    let len = rows
        .checked_mul(cols)
        .ok_or_else(|| Error::Data("dump shape overflows".into()))?;
    let mut data = Vec::with_capacity(len);
    for _ in 0..len {
        reader.read_exact(&mut b8)?;
        data.push(f64::from_le_bytes(b8));
    }
    Ok((rows, cols, data))
}

/// Samples trial `trial` of the ensemble. Deterministic in `(params, trial)`.
pub fn sample_matrix(params: &EnsembleParams, trial: u64) -> Result<MatrixSample> {
    params.validate()?;
    let mut rng = rng::stream(params.seed, trial, Purpose::Entries);
    let len = params.m * params.n;
    let (entries, raw) = match params.dist {
        EntryLaw::Gaussian => (gaussian_entries(len, params.n, &mut rng), None),
        EntryLaw::SparseBernoulli => {
            let p = params.p();
            let (hi, lo) = params.two_point_values();
            let entries = (0..len)
                .map(|_| if rng.random::<f64>() < p { hi } else { lo })
                .collect();
            (entries, None)
        }
        EntryLaw::BipartiteBiadjacency => {
            let p = params.p();
            let c = (params.n as f64 * p * (1.0 - p)).sqrt();
            let raw: Vec<u8> = (0..len).map(|_| u8::from(rng.random::<f64>() < p)).collect();
            let entries = raw.iter().map(|&b| (f64::from(b) - p) / c).collect();
            (entries, Some(raw))
        }
    };
    Ok(MatrixSample { rows: params.m, cols: params.n, entries, raw, params: *params, trial_index: trial })
}

/// Samples with a user-supplied entry law. The hook must produce centered
/// entries of variance `1/N`; no cumulant formulas are available for it.
pub fn sample_matrix_with<F>(params: &EnsembleParams, trial: u64, mut entry: F) -> Result<MatrixSample>
where
    F: FnMut(&mut StreamRng) -> f64,
{
    if params.m == 0 || params.n == 0 || params.n < params.m {
        return Err(Error::param("need N >= M >= 1"));
    }
    let mut rng = rng::stream(params.seed, trial, Purpose::Entries);
    let entries: Vec<f64> = (0..params.m * params.n).map(|_| entry(&mut rng)).collect();
    if entries.iter().any(|x| !x.is_finite()) {
        return Err(Error::Data("custom sampler produced a non-finite entry".into()));
    }
    Ok(MatrixSample { rows: params.m, cols: params.n, entries, raw: None, params: *params, trial_index: trial })
}

fn gaussian_entries(len: usize, n: usize, rng: &mut StreamRng) -> Vec<f64> {
    let scale = 1.0 / (n as f64).sqrt();
    (0..len).map(|_| scale * rng.sample::<f64, _>(StandardNormal)).collect()
}

/// Initial matrix, Gaussian target and time of the Dyson matrix flow.
#[derive(Debug, Clone)]
pub struct FlowState {
    pub x0: MatrixSample,
    /// Gaussian `M × N` matrix with entry variance `1/N`, row-major.
    pub target: Vec<f64>,
    pub t: f64,
}

impl FlowState {
    /// Draws the Gaussian target for `x0` from its own stream, so the pair
    /// `(X0, W)` is shared by every time on a grid.
    pub fn new(x0: MatrixSample, t: f64) -> Self {
        let mut rng = rng::stream(x0.params.seed, x0.trial_index, Purpose::FlowTarget);
        let target = gaussian_entries(x0.rows * x0.cols, x0.cols, &mut rng);
        Self { x0, target, t }
    }

    pub fn at(&self, t: f64) -> Self {
        Self { x0: self.x0.clone(), target: self.target.clone(), t }
    }
}

/// `X_t = e^{-t/2} X0 + sqrt(1 - e^{-t}) W`, entrywise.
pub fn dyson_flow_at(state: &FlowState) -> Result<MatrixSample> {
    let t = state.t;
    if !(t >= 0.0) || !t.is_finite() {
        return Err(Error::param(format!("flow time must be finite and >= 0, got {t}")));
    }
    if t == 0.0 {
        return Ok(state.x0.clone());
    }
    let a = (-0.5 * t).exp();
    let b = (-(-t).exp_m1()).sqrt();
    let entries = state
        .x0
        .entries
        .iter()
        .zip(&state.target)
        .map(|(x, w)| a * x + b * w)
        .collect();
    Ok(MatrixSample { entries, raw: None, ..state.x0.clone() })
}

/// Exact and flowed cumulants of the entry law.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CumulantProfile {
    /// `kappa[k-1]` is the k-th cumulant.
    pub kappa: Vec<f64>,
    /// Normalized cumulants `s^(k) = N q^{k-2} kappa^(k)`.
    pub s: Vec<f64>,
    pub t: f64,
    pub q: f64,
    pub q_t: f64,
    pub kappa_t: Vec<f64>,
    pub s_t: Vec<f64>,
}

impl CumulantProfile {
    pub fn s4(&self) -> f64 {
        self.s[3]
    }

    pub fn s4_t(&self) -> f64 {
        self.s_t[3]
    }
}

/// Raw moments `E X^k`, `k = 0..=k_max`, of the centered two-point law.
pub fn two_point_moments(n: usize, p: f64, k_max: usize) -> Vec<f64> {
    let c = (n as f64 * p * (1.0 - p)).sqrt();
    (0..=k_max)
        .map(|k| {
            let k = k as i32;
            ((-p).powi(k) * (1.0 - p) + (1.0 - p).powi(k) * p) / c.powi(k)
        })
        .collect()
}

/// Cumulants `kappa_1..kappa_K` from raw moments `mu_0..mu_K`.
pub fn cumulants_from_moments(mu: &[f64]) -> Vec<f64> {
    let k_max = mu.len() - 1;
    let mut kappa = vec![0.0; k_max + 1];
    for n in 1..=k_max {
        let mut acc = mu[n];
        let mut binom = 1.0; // C(n-1, m-1)
        for m in 1..n {
            acc -= binom * kappa[m] * mu[n - m];
            binom = binom * (n - m) as f64 / m as f64;
        }
        kappa[n] = acc;
    }
    kappa.remove(0);
    kappa
}

/// Cumulant profile of the entry law at flow time `t`.
pub fn cumulant_profile(params: &EnsembleParams, t: f64, k_max: usize) -> Result<CumulantProfile> {
    params.validate()?;
    if k_max < 4 {
        return Err(Error::param("K_max must be at least 4"));
    }
    if !(t >= 0.0) {
        return Err(Error::param("flow time must be >= 0"));
    }
    let n = params.n as f64;
    let q = params.q;
    let mut kappa = match params.dist {
        EntryLaw::Gaussian => {
            let mut k = vec![0.0; k_max];
            k[1] = 1.0 / n;
            k
        }
        EntryLaw::SparseBernoulli | EntryLaw::BipartiteBiadjacency => {
            cumulants_from_moments(&two_point_moments(params.n, params.p(), k_max))
        }
    };
    // Exact by construction; pin against rounding in the recursion.
    kappa[0] = 0.0;
    kappa[1] = 1.0 / n;

    let normalize = |kap: &[f64], q: f64| -> Vec<f64> {
        kap.iter()
            .enumerate()
            .map(|(i, &kv)| match i + 1 {
                1 => 0.0,
                2 => 1.0,
                k => n * q.powi(k as i32 - 2) * kv,
            })
            .collect()
    };
    let s = normalize(&kappa, q);
    let q_t = q * (0.5 * t).exp();
    let kappa_t: Vec<f64> = kappa
        .iter()
        .enumerate()
        .map(|(i, &kv)| if i + 1 >= 3 { (-(i as f64 + 1.0) * t / 2.0).exp() * kv } else { kv })
        .collect();
    let s_t = normalize(&kappa_t, q_t);
    Ok(CumulantProfile { kappa, s, t, q, q_t, kappa_t, s_t })
}

/// Constants `(C, c)` of the moment bound `E|X|^k <= (C k)^{c k} / (N q^{k-2})`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentBound {
    pub scale: f64,
    pub exponent: f64,
}

impl Default for MomentBound {
    fn default() -> Self {
        Self { scale: 1.0, exponent: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentRow {
    pub k: usize,
    /// Empirical raw moment `mean(x^k)`.
    pub moment: f64,
    pub std_err: f64,
    /// Empirical absolute moment `mean(|x|^k)`.
    pub abs_moment: f64,
    /// `(C k)^{c k} / (N q^{k-2})` for `k >= 3`, `None` below.
    pub bound: Option<f64>,
    pub violated: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentAudit {
    pub rows: Vec<MomentRow>,
    pub bound: MomentBound,
    pub any_violation: bool,
}

pub fn moment_audit(sample: &MatrixSample, k_max: usize) -> Result<MomentAudit> {
    moment_audit_with(sample, k_max, MomentBound::default())
}

pub fn moment_audit_with(sample: &MatrixSample, k_max: usize, bound: MomentBound) -> Result<MomentAudit> {
    if sample.entries.is_empty() {
        return Err(Error::Data("empty sample".into()));
    }
    let count = sample.entries.len() as f64;
    let mut sums = vec![0.0; 2 * k_max + 1];
    let mut abs_sums = vec![0.0; k_max + 1];
    for &x in &sample.entries {
        let mut pw: f64 = 1.0;
        for (k, s) in sums.iter_mut().enumerate() {
            *s += pw;
            if k <= k_max {
                abs_sums[k] += pw.abs();
            }
            pw *= x;
        }
    }
    let n = sample.cols as f64;
    let q = sample.params.q;
    let rows: Vec<MomentRow> = (1..=k_max)
        .map(|k| {
            let moment = sums[k] / count;
            let second = sums[2 * k] / count;
            let std_err = ((second - moment * moment).max(0.0) / count).sqrt();
            let abs_moment = abs_sums[k] / count;
            let bound = (k >= 3).then(|| {
                let kf = k as f64;
                (bound.scale * kf).powf(bound.exponent * kf) / (n * q.powi(k as i32 - 2))
            });
            let violated = bound.is_some_and(|b| abs_moment > b);
            MomentRow { k, moment, std_err, abs_moment, bound, violated }
        })
        .collect();
    let any_violation = rows.iter().any(|r| r.violated);
    Ok(MomentAudit { rows, bound, any_violation })
}
