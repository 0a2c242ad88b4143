use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use mplab::experiments::{
    run_density_compare, run_edge_norm, run_flow_tracking, run_local_law, run_rigidity_deloc, run_tw_limit_cached,
    install, ConfigMap, ExperimentConfig, ExperimentKind, GridSpec, Report,
};
use mplab::law::{edge_report, law_derived, LawParams};
use mplab::twref::{load_or_build, CacheStatus};
use mplab::{rng, Error, Result};
use num_complex::Complex64;

/// Exit code when `--check` is set and a report check fails.
const CHECK_FAILED: u8 = 3;

#[derive(Parser, Debug)]
#[command(name = "mplab", version, about = "Sparse sample covariance spectra and the corrected Marchenko-Pastur law")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Evaluate w, density and control parameters on a spectral grid (CSV).
    LawEval(Common),
    /// Newton and asymptotic edges (JSON).
    Edges(Common),
    /// Pooled eigenvalue histogram against the corrected and plain laws.
    Density(Common),
    /// Empirical against deterministic Stieltjes transform.
    LocalLaw(Common),
    /// Largest eigenvalue against the corrected edge.
    EdgeNorm(Common),
    /// Rescaled largest eigenvalue against the Tracy-Widom reference.
    TwLimit(Common),
    /// Largest eigenvalue along the Dyson matrix flow.
    Flow(Common),
    /// Rigidity of the top eigenvalues and eigenvector delocalization.
    Rigidity(Common),
    /// Build (or verify) the Tracy-Widom reference cache.
    TwBuildCache(Common),
}

#[derive(Args, Debug, Clone, Default)]
struct Common {
    /// Flat `key = value` configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Master seed; drawn from system entropy when absent.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads.
    #[arg(long)]
    jobs: Option<usize>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Exit with code 3 when a report check fails.
    #[arg(long)]
    check: bool,
    #[arg(long = "N")]
    n: Option<usize>,
    #[arg(long = "M")]
    m: Option<usize>,
    #[arg(long)]
    d: Option<f64>,
    #[arg(long)]
    q: Option<f64>,
    #[arg(long)]
    p: Option<f64>,
    #[arg(long)]
    phi: Option<f64>,
    /// Entry law: sparse, bipartite or gaussian.
    #[arg(long)]
    dist: Option<String>,
    #[arg(long)]
    s4: Option<f64>,
    #[arg(long)]
    t: Option<f64>,
    #[arg(long)]
    trials: Option<usize>,
    /// Spectral grid, e.g. `E=edge,mid;eta=0.001:1:25` or `E=0.1:4:200;eta=0.01:0.01:1`.
    #[arg(long)]
    grid_spec: Option<String>,
    /// Tracy-Widom reference cache file.
    #[arg(long)]
    tw_cache: Option<PathBuf>,
    #[arg(long)]
    tw_count: Option<usize>,
    #[arg(long)]
    tw_n_internal: Option<usize>,
}

impl Common {
    /// Configuration file overlaid with the flags.
    fn config_map(&self) -> Result<ConfigMap> {
        let mut map = match &self.config {
            Some(path) => ConfigMap::parse(&fs::read_to_string(path)?)?,
            None => ConfigMap::default(),
        };
        if self.d.is_some() && self.m.is_none() {
            map.remove("ensemble.M");
        }
        if self.q.is_some() || self.p.is_some() || self.phi.is_some() {
            for key in ["ensemble.q", "ensemble.p", "ensemble.phi"] {
                map.remove(key);
            }
        }
        if let Some(seed) = self.seed {
            map.remove("ensemble.seed");
            map.set("seed", seed);
        }
        let mut set = |key: &str, value: Option<String>| {
            if let Some(v) = value {
                map.set(key, v);
            }
        };
        set("ensemble.N", self.n.map(|v| v.to_string()));
        set("ensemble.M", self.m.map(|v| v.to_string()));
        set("ensemble.d", self.d.map(|v| v.to_string()));
        set("ensemble.q", self.q.map(|v| v.to_string()));
        set("ensemble.p", self.p.map(|v| v.to_string()));
        set("ensemble.phi", self.phi.map(|v| v.to_string()));
        set("ensemble.dist", self.dist.clone());
        set("law.s4", self.s4.map(|v| v.to_string()));
        set("law.t", self.t.map(|v| v.to_string()));
        set("experiment.trials", self.trials.map(|v| v.to_string()));
        set("experiment.jobs", self.jobs.map(|v| v.to_string()));
        set("experiment.grid", self.grid_spec.clone());
        set("tw.cache", self.tw_cache.as_ref().map(|p| p.display().to_string()));
        set("tw.count", self.tw_count.map(|v| v.to_string()));
        set("tw.n_internal", self.tw_n_internal.map(|v| v.to_string()));
        set("output.dir", self.out.as_ref().map(|p| p.display().to_string()));
        map.check_keys()?;
        Ok(map)
    }

    fn experiment(&self, kind: ExperimentKind) -> Result<ExperimentConfig> {
        let map = self.config_map()?;
        let has_seed = map.raw("seed").is_some() || map.raw("ensemble.seed").is_some();
        let seed = if has_seed { 0 } else { rng::entropy_seed() };
        let config = ExperimentConfig::from_map(kind, &map, seed)?;
        if !has_seed {
            eprintln!("seed = {}", config.ensemble.seed);
        }
        Ok(config)
    }
}

/// Law parameters for the deterministic subcommands. Without an ensemble
/// size, `d` defaults to 1 and `s⁴` to its sparse limit 1; `q` is required.
fn law_params(map: &ConfigMap) -> Result<(LawParams, usize)> {
    let s4: Option<f64> = map.get("law.s4")?;
    let t: f64 = map.get_or("law.t", 0.0)?;
    if map.raw("ensemble.N").is_some() && (s4.is_none() || map.raw("ensemble.q").is_none()) {
        let config = ExperimentConfig::from_map(ExperimentKind::Density, map, 0)?;
        let law = match s4 {
            Some(s4) => LawParams::new(config.law.d, config.law.q, s4, t)?,
            None => config.law,
        };
        return Ok((law, config.ensemble.n));
    }
    let q: f64 = map
        .get("ensemble.q")?
        .ok_or_else(|| Error::Parameter("--q is required without --N".into()))?;
    let d: f64 = map.get_or("ensemble.d", 1.0)?;
    let n: usize = map.get_or("ensemble.N", 1000)?;
    Ok((LawParams::new(d, q, s4.unwrap_or(1.0), t)?, n))
}

fn output_path(out: Option<&Path>, name: &str) -> Result<Option<PathBuf>> {
    match out {
        Some(dir) => {
            fs::create_dir_all(dir)?;
            Ok(Some(dir.join(name)))
        }
        None => Ok(None),
    }
}

fn emit(path: Option<PathBuf>, bytes: &[u8]) -> Result<()> {
    match path {
        Some(p) => fs::write(&p, bytes).map_err(Error::from).map(|_| eprintln!("wrote {}", p.display())),
        None => io::stdout().write_all(bytes).map_err(Error::from),
    }
}

fn law_eval(common: &Common) -> Result<u8> {
    let map = common.config_map()?;
    let (law, n) = law_params(&map)?;
    let grid: GridSpec = match map.raw("experiment.grid") {
        Some(text) => text.parse()?,
        None => {
            let dom = law.domain();
            format!("E={}:{}:200;eta=0.01:0.01:1", dom.e_lo, dom.e_hi).parse()?
        }
    };
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["E", "eta", "w_re", "w_im", "rho", "alpha1", "alpha2_abs", "beta", "residual"])?;
    for (e, eta) in grid.points(&law)? {
        let der = law_derived(Complex64::new(e, eta), &law, n)?;
        w.write_record(
            [e, eta, der.w.re, der.w.im, der.w.im / std::f64::consts::PI, der.alpha1, der.alpha2.norm(), der.beta, der.residual]
                .map(|v| format!("{v:e}")),
        )?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    let name = format!("law_eval_d{}_q{}_s4{}_t{}.csv", law.d, law.q, law.s4, law.t);
    emit(output_path(common.out.as_deref(), &name)?, &bytes)?;
    Ok(0)
}

fn edges(common: &Common) -> Result<u8> {
    let map = common.config_map()?;
    let (law, _) = law_params(&map)?;
    let report = edge_report(&law)?;
    let json = serde_json::to_string_pretty(&report)? + "\n";
    let name = format!("edges_d{}_q{}_s4{}_t{}.json", law.d, law.q, law.s4, law.t);
    emit(output_path(common.out.as_deref(), &name)?, json.as_bytes())?;
    Ok(0)
}

fn finish<R, S>(report: Report<R, S>, common: &Common) -> Result<u8>
where
    R: serde::Serialize + serde::de::DeserializeOwned,
    S: serde::Serialize + serde::de::DeserializeOwned,
{
    for w in &report.warnings {
        eprintln!("warning: {w}");
    }
    for f in &report.failures {
        eprintln!("trial {} failed: {}", f.trial, f.error);
    }
    for c in &report.checks {
        eprintln!("{} {} = {:.6e} (threshold {:.6e})", if c.passed { "PASS" } else { "FAIL" }, c.name, c.value, c.threshold);
    }
    let dir = report.config.out_dir.clone().unwrap_or_else(|| PathBuf::from("results"));
    let (json, csv) = report.write_to(&dir)?;
    eprintln!("wrote {} and {}", json.display(), csv.display());
    Ok(if common.check && !report.passed() { CHECK_FAILED } else { 0 })
}

fn tw_build_cache(common: &Common) -> Result<u8> {
    let map = common.config_map()?;
    let config = ExperimentConfig::from_map(ExperimentKind::TwLimit, &map, 0)?;
    let tw = &config.tw;
    let (reference, status) = install(config.jobs, || load_or_build(&tw.cache, tw.count, tw.n_internal, tw.seed))??;
    let verb = match status {
        CacheStatus::Hit => "verified",
        CacheStatus::Built => "built",
        CacheStatus::Rebuilt => "rebuilt",
    };
    eprintln!(
        "{verb} {} ({} draws, n_internal {}, mean {:.4}, variance {:.4})",
        tw.cache.display(),
        reference.count(),
        reference.n_internal,
        reference.mean(),
        reference.variance()
    );
    Ok(0)
}

fn dispatch(cli: Cli) -> Result<u8> {
    match &cli.command {
        Command::LawEval(c) => law_eval(c),
        Command::Edges(c) => edges(c),
        Command::Density(c) => finish(run_density_compare(&c.experiment(ExperimentKind::Density)?)?, c),
        Command::LocalLaw(c) => finish(run_local_law(&c.experiment(ExperimentKind::LocalLaw)?)?, c),
        Command::EdgeNorm(c) => finish(run_edge_norm(&c.experiment(ExperimentKind::EdgeNorm)?)?, c),
        Command::TwLimit(c) => finish(run_tw_limit_cached(&c.experiment(ExperimentKind::TwLimit)?)?, c),
        Command::Flow(c) => finish(run_flow_tracking(&c.experiment(ExperimentKind::Flow)?)?, c),
        Command::Rigidity(c) => finish(run_rigidity_deloc(&c.experiment(ExperimentKind::Rigidity)?)?, c),
        Command::TwBuildCache(c) => tw_build_cache(c),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match dispatch(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
