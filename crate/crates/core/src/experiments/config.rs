//! Experiment configuration and the flat `key = value` file format.
//!
//! ```text
//! # comment
//! ensemble.N = 2000
//! ensemble.d = 2
//! ensemble.phi = 0.25
//! experiment.trials = 20
//! ```

use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::ensemble::{cumulant_profile, EnsembleParams, EntryLaw};
use crate::error::{Error, Result};
use crate::law::{edge_report, logspace, LawParams, SpectralDomain};
use crate::twref;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    LocalLaw,
    EdgeNorm,
    TwLimit,
    Flow,
    Rigidity,
    Density,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 6] = [
        ExperimentKind::LocalLaw,
        ExperimentKind::EdgeNorm,
        ExperimentKind::TwLimit,
        ExperimentKind::Flow,
        ExperimentKind::Rigidity,
        ExperimentKind::Density,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::LocalLaw => "local-law",
            ExperimentKind::EdgeNorm => "edge-norm",
            ExperimentKind::TwLimit => "tw-limit",
            ExperimentKind::Flow => "flow",
            ExperimentKind::Rigidity => "rigidity",
            ExperimentKind::Density => "density",
        }
    }

    /// `(N, d, phi, trials)` used when the configuration does not say otherwise.
    fn defaults(self) -> (usize, f64, f64, usize) {
        match self {
            ExperimentKind::LocalLaw => (2000, 2.0, 0.25, 20),
            ExperimentKind::EdgeNorm => (2000, 2.0, 0.25, 200),
            ExperimentKind::TwLimit => (500, 2.0, 0.35, 1000),
            ExperimentKind::Flow => (1000, 2.0, 0.3, 100),
            ExperimentKind::Rigidity => (1000, 2.0, 0.4, 100),
            ExperimentKind::Density => (2000, 2.0, 0.25, 50),
        }
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ExperimentKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::param(format!("unknown experiment '{s}'")))
    }
}

/// An energy on the grid, either fixed or tied to the law's support.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EnergySpec {
    UpperEdge,
    LowerEdge,
    BulkMid,
    Value(f64),
}

impl EnergySpec {
    pub fn resolve(self, law: &LawParams) -> Result<f64> {
        if let EnergySpec::Value(e) = self {
            return Ok(e);
        }
        let edges = edge_report(law)?;
        Ok(match self {
            EnergySpec::UpperEdge => edges.l_plus,
            EnergySpec::LowerEdge => edges.support_lo(),
            EnergySpec::BulkMid => 0.5 * (edges.support_lo() + edges.l_plus),
            EnergySpec::Value(_) => unreachable!(),
        })
    }
}

impl FromStr for EnergySpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "edge" | "upper" | "L+" => Ok(EnergySpec::UpperEdge),
            "lower" | "L-" => Ok(EnergySpec::LowerEdge),
            "mid" | "bulk" => Ok(EnergySpec::BulkMid),
            v => v
                .parse()
                .map(EnergySpec::Value)
                .map_err(|_| Error::param(format!("bad energy '{v}' (edge, lower, mid or a number)"))),
        }
    }
}

/// Spectral grid: a list of energies times a log-spaced η range.
///
/// Text form: `E=edge,mid;eta=0.001:1:25`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub energies: Vec<EnergySpec>,
    pub eta_min: f64,
    pub eta_max: f64,
    pub n_eta: usize,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            energies: vec![EnergySpec::UpperEdge, EnergySpec::BulkMid],
            eta_min: 1e-3,
            eta_max: 1.0,
            n_eta: 25,
        }
    }
}

impl FromStr for GridSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut grid = GridSpec::default();
        for part in s.split(';').map(str::trim).filter(|p| !p.is_empty()) {
            let (key, value) = part
                .split_once('=')
                .ok_or_else(|| Error::param(format!("grid part '{part}' is not key=value")))?;
            match key.trim() {
                "E" | "energies" => {
                    grid.energies = Vec::new();
                    for item in value.split(',').map(str::trim).filter(|v| !v.is_empty()) {
                        // `lo:hi:count` expands to evenly spaced energies
                        if let [lo, hi, count] = item.split(':').collect::<Vec<_>>()[..] {
                            let (lo, hi): (f64, f64) = (parse_num(lo, "E min")?, parse_num(hi, "E max")?);
                            let values = crate::law::linspace(lo, hi, parse_num(count, "E count")?);
                            grid.energies.extend(values.into_iter().map(EnergySpec::Value));
                        } else {
                            grid.energies.push(item.parse()?);
                        }
                    }
                }
                "eta" => {
                    let f: Vec<&str> = value.split(':').collect();
                    if f.len() != 3 {
                        return Err(Error::param("eta must be min:max:count"));
                    }
                    grid.eta_min = parse_num(f[0], "eta min")?;
                    grid.eta_max = parse_num(f[1], "eta max")?;
                    grid.n_eta = parse_num(f[2], "eta count")?;
                }
                other => return Err(Error::param(format!("unknown grid key '{other}'"))),
            }
        }
        Ok(grid)
    }
}

impl GridSpec {
    /// Resolved points, ordered by energy then increasing η.
    pub fn points(&self, law: &LawParams) -> Result<Vec<(f64, f64)>> {
        if self.energies.is_empty() || self.n_eta == 0 {
            return Err(Error::param("the spectral grid is empty"));
        }
        if !(self.eta_min > 0.0 && self.eta_min <= self.eta_max) {
            return Err(Error::param("need 0 < eta_min <= eta_max"));
        }
        let domain = SpectralDomain::for_ratio(law.d);
        let etas = logspace(self.eta_min, self.eta_max, self.n_eta);
        let mut out = Vec::with_capacity(self.energies.len() * etas.len());
        for spec in &self.energies {
            let e = spec.resolve(law)?;
            for &eta in &etas {
                if !(e >= domain.e_lo && e <= domain.e_hi && eta > domain.eta_lo && eta < domain.eta_hi) {
                    return Err(Error::param(format!("grid point ({e}, {eta}) lies outside the spectral domain")));
                }
                out.push((e, eta));
            }
        }
        Ok(out)
    }
}

/// Calibration constants turning "≺" bounds into checks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Thresholds {
    /// Constant `C` in `ratio ≤ C`.
    pub constant: f64,
    /// Required fraction of instances within the bound.
    pub fraction: f64,
    pub ks_max: f64,
    /// `ε` in the delocalization bound `N^{-1/2+ε}`.
    pub deloc_eps: f64,
    /// Largest index `j` in the rigidity check.
    pub j_max: usize,
    /// `δ` in the Tracy–Widom regime `q ≥ N^{1/6+δ}`.
    pub tw_margin: f64,
    pub slope_rel_tol: f64,
    pub slope_min_q: f64,
    /// Standard errors allowed for the flow endpoint comparison.
    pub endpoint_se: f64,
    /// Standard errors allowed per density bin.
    pub bin_se: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Self {
            constant: 10.0,
            fraction: 0.95,
            ks_max: 0.10,
            deloc_eps: 0.25,
            j_max: 20,
            tw_margin: 0.1,
            slope_rel_tol: 0.2,
            slope_min_q: 20.0,
            endpoint_se: 3.0,
            bin_se: 5.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TwSettings {
    pub cache: PathBuf,
    pub count: usize,
    pub n_internal: usize,
    pub seed: u64,
}

impl Default for TwSettings {
    fn default() -> Self {
        Self {
            cache: PathBuf::from("tw_cache/twref.bin"),
            count: twref::DEFAULT_COUNT,
            n_internal: twref::DEFAULT_INTERNAL_DIM,
            seed: 0x5457_5245_4631,
        }
    }
}

/// Fully resolved experiment configuration. Everything except the thread
/// count and output directory is echoed into reports.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    pub ensemble: EnsembleParams,
    /// Law matching the ensemble at flow time `law.t`.
    pub law: LawParams,
    pub trials: usize,
    pub grid: GridSpec,
    pub t_grid: Vec<f64>,
    pub bins: usize,
    pub thresholds: Thresholds,
    pub tw: TwSettings,
    #[serde(skip, default = "one_job")]
    pub jobs: usize,
    #[serde(skip)]
    pub out_dir: Option<PathBuf>,
}

fn one_job() -> usize {
    1
}

/// Flow grid `{0, 0.5, 1, 2, 4, 6 log N}`.
pub fn default_t_grid(n: usize) -> Vec<f64> {
    vec![0.0, 0.5, 1.0, 2.0, 4.0, 6.0 * (n as f64).ln()]
}

/// Law parameters of an ensemble: exact `s⁴`, and `q = 1` with `s⁴ = 0` for
/// Gaussian entries.
pub fn law_for(ensemble: &EnsembleParams, t: f64) -> Result<LawParams> {
    if ensemble.dist == EntryLaw::Gaussian {
        return LawParams::new(ensemble.d(), ensemble.q, 0.0, t);
    }
    let s4 = cumulant_profile(ensemble, 0.0, 4)?.s4();
    LawParams::new(ensemble.d(), ensemble.q, s4, t)
}

impl ExperimentConfig {
    /// Defaults of `kind` with the given master seed.
    pub fn defaults(kind: ExperimentKind, seed: u64) -> Result<Self> {
        Self::from_map(kind, &ConfigMap::default(), seed)
    }

    /// Resolves `map` on top of the defaults of `kind`. `seed` is used when
    /// the map carries none.
    pub fn from_map(kind: ExperimentKind, map: &ConfigMap, seed: u64) -> Result<Self> {
        map.check_keys()?;
        let (n_def, d_def, phi_def, trials_def) = kind.defaults();
        let n: usize = map.get_or("ensemble.N", n_def)?;
        let m: usize = match map.get::<usize>("ensemble.M")? {
            Some(m) => m,
            None => {
                let d: f64 = map.get_or("ensemble.d", d_def)?;
                if !(d >= 1.0) {
                    return Err(Error::param(format!("aspect ratio d must be >= 1, got {d}")));
                }
                ((n as f64 / d).round() as usize).max(1)
            }
        };
        let seed: u64 = match map.get("seed")? {
            Some(s) => s,
            None => map.get_or("ensemble.seed", seed)?,
        };
        let dist: EntryLaw = map.get_or("ensemble.dist", EntryLaw::SparseBernoulli)?;
        let q = match (map.get::<f64>("ensemble.q")?, map.get::<f64>("ensemble.p")?, map.get::<f64>("ensemble.phi")?) {
            (Some(q), None, None) => q,
            (None, Some(p), None) => (n as f64 * p).sqrt(),
            (None, None, Some(phi)) => (n as f64).powf(phi),
            (None, None, None) => {
                if dist == EntryLaw::Gaussian {
                    (n as f64).sqrt()
                } else {
                    (n as f64).powf(phi_def)
                }
            }
            _ => return Err(Error::param("give at most one of ensemble.q, ensemble.p, ensemble.phi")),
        };
        let ensemble = EnsembleParams { n, m, q, dist, seed };
        ensemble.validate()?;

        let t: f64 = map.get_or("law.t", 0.0)?;
        let mut law = law_for(&ensemble, t)?;
        if let Some(s4) = map.get::<f64>("law.s4")? {
            law = LawParams::new(law.d, law.q, s4, t)?;
        }

        let mut th = Thresholds::default();
        th.constant = map.get_or("experiment.constant", th.constant)?;
        th.fraction = map.get_or("experiment.fraction", th.fraction)?;
        th.ks_max = map.get_or("experiment.ks_max", th.ks_max)?;
        th.deloc_eps = map.get_or("experiment.deloc_eps", th.deloc_eps)?;
        th.j_max = map.get_or("experiment.j_max", th.j_max)?;
        th.tw_margin = map.get_or("experiment.tw_margin", th.tw_margin)?;
        th.slope_rel_tol = map.get_or("experiment.slope_rel_tol", th.slope_rel_tol)?;
        th.slope_min_q = map.get_or("experiment.slope_min_q", th.slope_min_q)?;
        th.endpoint_se = map.get_or("experiment.endpoint_se", th.endpoint_se)?;
        th.bin_se = map.get_or("experiment.bin_se", th.bin_se)?;

        let mut tw = TwSettings::default();
        tw.cache = map.get_or("tw.cache", tw.cache)?;
        tw.count = map.get_or("tw.count", tw.count)?;
        tw.n_internal = map.get_or("tw.n_internal", tw.n_internal)?;
        tw.seed = map.get_or("tw.seed", tw.seed)?;

        let t_grid = match map.raw("experiment.t_grid") {
            Some(text) => text.split(',').map(|v| parse_num(v, "t_grid")).collect::<Result<Vec<f64>>>()?,
            None => default_t_grid(n),
        };
        let config = Self {
            experiment: kind,
            ensemble,
            law,
            trials: map.get_or("experiment.trials", trials_def)?,
            grid: map.get_or("experiment.grid", GridSpec::default())?,
            t_grid,
            bins: map.get_or("experiment.bins", 40)?,
            thresholds: th,
            tw,
            jobs: map.get_or("experiment.jobs", 1)?,
            out_dir: map.get::<PathBuf>("output.dir")?,
        };
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        self.ensemble.validate()?;
        self.law.validate()?;
        if self.trials == 0 {
            return Err(Error::param("trials must be at least 1"));
        }
        if self.jobs == 0 {
            return Err(Error::param("jobs must be at least 1"));
        }
        if self.t_grid.is_empty() || self.t_grid.iter().any(|t| !(*t >= 0.0 && t.is_finite())) {
            return Err(Error::param("t_grid must be a nonempty list of times >= 0"));
        }
        let t_cap = 6.0 * (self.ensemble.n as f64).ln();
        if self.experiment == ExperimentKind::Flow && self.t_grid.iter().any(|&t| t > t_cap + 1e-9) {
            return Err(Error::param(format!("flow times must lie in [0, 6 log N] = [0, {t_cap}]")));
        }
        if !(self.thresholds.fraction > 0.0 && self.thresholds.fraction <= 1.0) {
            return Err(Error::param("experiment.fraction must lie in (0, 1]"));
        }
        if self.bins == 0 {
            return Err(Error::param("bins must be at least 1"));
        }
        Ok(())
    }

    /// `{experiment}_N{N}_d{d}_q{q}_seed{seed}`.
    pub fn file_stem(&self) -> String {
        format!(
            "{}_N{}_d{}_q{:.4}_seed{}",
            self.experiment,
            self.ensemble.n,
            self.ensemble.d(),
            self.ensemble.q,
            self.ensemble.seed
        )
    }
}

fn parse_num<T: FromStr>(text: &str, what: &str) -> Result<T> {
    text.trim().parse().map_err(|_| Error::param(format!("cannot parse {what} from '{}'", text.trim())))
}

/// Keys understood by [`ExperimentConfig::from_map`].
pub const KNOWN_KEYS: &[&str] = &[
    "seed",
    "ensemble.N",
    "ensemble.M",
    "ensemble.d",
    "ensemble.q",
    "ensemble.p",
    "ensemble.phi",
    "ensemble.dist",
    "ensemble.seed",
    "law.s4",
    "law.t",
    "experiment.trials",
    "experiment.jobs",
    "experiment.grid",
    "experiment.t_grid",
    "experiment.bins",
    "experiment.constant",
    "experiment.fraction",
    "experiment.ks_max",
    "experiment.deloc_eps",
    "experiment.j_max",
    "experiment.tw_margin",
    "experiment.slope_rel_tol",
    "experiment.slope_min_q",
    "experiment.endpoint_se",
    "experiment.bin_se",
    "tw.cache",
    "tw.count",
    "tw.n_internal",
    "tw.seed",
    "output.dir",
];

/// Flat `key = value` map.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConfigMap {
    values: BTreeMap<String, String>,
}

impl ConfigMap {
    pub fn parse(text: &str) -> Result<Self> {
        let mut map = Self::default();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::param(format!("line {}: expected key = value", lineno + 1)))?;
            let key = key.trim();
            if key.is_empty() {
                return Err(Error::param(format!("line {}: empty key", lineno + 1)));
            }
            map.values.insert(key.to_string(), value.trim().to_string());
        }
        Ok(map)
    }

    pub fn set(&mut self, key: impl Into<String>, value: impl ToString) {
        self.values.insert(key.into(), value.to_string());
    }

    pub fn remove(&mut self, key: &str) -> Option<String> {
        self.values.remove(key)
    }

    pub fn raw(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }

    pub fn get<T: FromStr>(&self, key: &str) -> Result<Option<T>> {
        self.raw(key).map(|v| parse_num(v, key)).transpose()
    }

    pub fn get_or<T: FromStr>(&self, key: &str, default: T) -> Result<T> {
        Ok(self.get(key)?.unwrap_or(default))
    }

    pub fn check_keys(&self) -> Result<()> {
        match self.values.keys().find(|k| !KNOWN_KEYS.contains(&k.as_str())) {
            Some(k) => Err(Error::param(format!("unknown configuration key '{k}'"))),
            None => Ok(()),
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &str)> {
        self.values.iter().map(|(k, v)| (k.as_str(), v.as_str()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_flat_file() {
        let map = ConfigMap::parse("# local law\nensemble.N = 400\nensemble.d=2 # ratio\n\nexperiment.trials = 3\n").unwrap();
        let cfg = ExperimentConfig::from_map(ExperimentKind::LocalLaw, &map, 5).unwrap();
        assert_eq!((cfg.ensemble.n, cfg.ensemble.m, cfg.trials), (400, 200, 3));
        assert!((cfg.ensemble.q - 400f64.powf(0.25)).abs() < 1e-12);
        assert_eq!(cfg.ensemble.seed, 5);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(ConfigMap::parse("no equals sign").is_err());
        let map = ConfigMap::parse("ensemble.X = 1").unwrap();
        assert!(ExperimentConfig::from_map(ExperimentKind::Flow, &map, 0).is_err());
        let map = ConfigMap::parse("ensemble.q = 5\nensemble.p = 0.1").unwrap();
        assert!(ExperimentConfig::from_map(ExperimentKind::Flow, &map, 0).is_err());
        let map = ConfigMap::parse("experiment.trials = 0").unwrap();
        assert!(ExperimentConfig::from_map(ExperimentKind::Flow, &map, 0).is_err());
    }

    #[test]
    fn grid_spec_text() {
        let g: GridSpec = "E=0.5:1.5:3;eta=0.1:0.1:1".parse().unwrap();
        assert_eq!(g.energies, vec![EnergySpec::Value(0.5), EnergySpec::Value(1.0), EnergySpec::Value(1.5)]);
        assert_eq!(g.n_eta, 1);
        let g: GridSpec = "E=edge,1.5;eta=0.01:1:3".parse().unwrap();
        assert_eq!(g.energies, vec![EnergySpec::UpperEdge, EnergySpec::Value(1.5)]);
        assert_eq!((g.eta_min, g.eta_max, g.n_eta), (0.01, 1.0, 3));
        let empty: GridSpec = "E=".parse().unwrap();
        let law = LawParams::new(2.0, 10.0, 1.0, 0.0).unwrap();
        assert!(empty.points(&law).is_err());
        let outside: GridSpec = "E=50".parse().unwrap();
        assert!(outside.points(&law).is_err());
    }

    #[test]
    fn jobs_and_output_not_serialized() {
        let mut cfg = ExperimentConfig::defaults(ExperimentKind::Rigidity, 1).unwrap();
        let a = serde_json::to_string(&cfg).unwrap();
        cfg.jobs = 8;
        cfg.out_dir = Some("elsewhere".into());
        assert_eq!(a, serde_json::to_string(&cfg).unwrap());
    }
}
