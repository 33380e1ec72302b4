//! Command-line flags, config files, and their resolution into a [`Job`].
//!
//! Precedence is flag, then config file, then built-in default. A seed that
//! neither sets falls back to `CRB_COMPRESS_SEED`, then 0.

use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use crb_compress::mcharness::{ExperimentConfig, ModelSpec, Statistic};
use crb_compress::planner::DEFAULT_CONFIDENCES;
use crb_compress::randcomp::{CompressorSpec, Family, RadialLaw};
use crb_compress::sigmodel::{Source, UlaScenario};
use serde::de::DeserializeOwned;
use serde::Deserialize;

use crate::jobs::{default_kappas, EllipseConfig, FiguresConfig, FisherConfig, Job, PlanConfig};

pub const SEED_ENV: &str = "CRB_COMPRESS_SEED";
const DEFAULT_N: usize = 128;

#[derive(Parser, Debug)]
#[command(name = "crb-compress", version, about = "Fisher information and Cramér-Rao bounds under random compression")]
pub struct Cli {
    /// Cap on Monte Carlo worker threads. Results do not depend on it.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// FIM and per-parameter CRBs of a scenario.
    Fisher(FisherArgs),
    /// Monte Carlo campaign: summary JSON plus sample and histogram CSVs.
    Simulate(SimulateArgs),
    /// Evaluate an analytical law.
    Dist(DistArgs),
    /// Minimum measurement count for a tolerable CRB inflation.
    Plan(PlanArgs),
    /// Concentration ellipses before and after compression.
    Ellipse(EllipseArgs),
    /// Data and SVG plots for the histogram, ellipse and design-curve figures.
    Figures(FiguresArgs),
    /// Re-run the job recorded in a manifest.
    Replay(ReplayArgs),
}

/// Scenario flags shared by commands that need a signal model.
#[derive(Args, Debug, Default)]
pub struct ModelArgs {
    /// Array length of the two-source line-array scenario.
    #[arg(long)]
    pub n: Option<usize>,
    /// Electrical angles of unit-amplitude sources, comma separated.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub theta: Option<Vec<f64>>,
    /// Noise variance σ².
    #[arg(long)]
    pub sigma2: Option<f64>,
}

#[derive(Args, Debug)]
pub struct FisherArgs {
    /// TOML (or JSON) file with `model` and `sigma2`, or a bare scenario (`n`, `sources`).
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[command(flatten)]
    pub model: ModelArgs,
    /// Also write fisher.json and a manifest here.
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct SimulateArgs {
    /// Experiment config (TOML, or JSON by extension).
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long)]
    pub m: Option<usize>,
    #[arg(long, value_enum)]
    pub family: Option<FamilyArg>,
    #[arg(long)]
    pub trials: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub bins: Option<usize>,
    /// KS significance level.
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Statistic to record; repeatable. Forms: crb_ratio:I, crb_inflation:I,
    /// kl_ratio:T1,T2,..., w_eigenvalues, w_mean, fim_mean.
    #[arg(long = "statistic", value_parser = parse_statistic)]
    pub statistics: Vec<Statistic>,
    /// Run even when m > n − p.
    #[arg(long)]
    pub allow_law_violation: bool,
    #[arg(long, default_value = "results")]
    pub out_dir: PathBuf,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum FamilyArg {
    Gaussian,
    Stiefel,
    SphericalRows,
}

impl From<FamilyArg> for Family {
    fn from(f: FamilyArg) -> Family {
        match f {
            FamilyArg::Gaussian => Family::Gaussian,
            FamilyArg::Stiefel => Family::Stiefel,
            FamilyArg::SphericalRows => Family::SphericalRows,
        }
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum Law {
    /// Beta(m − p + 1, n − m), the before/after CRB ratio.
    CrbRatio,
    /// Reciprocal of the CRB ratio.
    CrbInflation,
    /// Beta(m, n − m), the KL-divergence ratio.
    KlRatio,
    /// Beta(a, b).
    Beta,
    /// Joint eigenvalue density of the normalized FIM (logpdf only).
    WEigenvalues,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum Eval {
    Pdf,
    Logpdf,
    Cdf,
    Sf,
    Quantile,
    Mean,
    Variance,
}

#[derive(Args, Debug)]
pub struct DistArgs {
    #[arg(long, value_enum)]
    pub law: Law,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub m: Option<usize>,
    #[arg(long)]
    pub p: Option<usize>,
    #[arg(long)]
    pub a: Option<f64>,
    #[arg(long)]
    pub b: Option<f64>,
    #[arg(long, value_enum)]
    pub eval: Eval,
    /// Evaluation points, comma separated (the eigenvalue vector for w-eigenvalues).
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub at: Vec<f64>,
}

#[derive(Args, Debug)]
pub struct PlanArgs {
    #[arg(long, default_value_t = DEFAULT_N)]
    pub n: usize,
    #[arg(long, default_value_t = 2)]
    pub p: usize,
    /// Tolerable CRB inflation factor(s), comma separated.
    #[arg(long, alias = "kappas", value_delimiter = ',')]
    pub kappa: Vec<f64>,
    /// Confidence level(s), comma separated.
    #[arg(long, alias = "confidences", value_delimiter = ',')]
    pub confidence: Vec<f64>,
    /// Also write plan.csv and a manifest here.
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct EllipseArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long)]
    pub m: Option<usize>,
    #[arg(long, value_enum, default_value = "gaussian")]
    pub family: FamilyArg,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, default_value_t = 100)]
    pub curves: usize,
    #[arg(long, default_value_t = 200)]
    pub points: usize,
    /// Level r²; defaults to J₁₁.
    #[arg(long)]
    pub r2: Option<f64>,
    #[arg(long, default_value = "results")]
    pub out_dir: PathBuf,
}

#[derive(Args, Debug)]
pub struct FiguresArgs {
    /// Optional TOML with any of the fields below.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub m: Option<usize>,
    #[arg(long, value_enum)]
    pub family: Option<FamilyArg>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub trials: Option<usize>,
    #[arg(long)]
    pub bins: Option<usize>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub curves: Option<usize>,
    #[arg(long)]
    pub points: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    pub kappas: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    pub confidences: Option<Vec<f64>>,
    #[arg(long, default_value = "figures")]
    pub out_dir: PathBuf,
}

#[derive(Args, Debug)]
pub struct ReplayArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    /// Defaults to the manifest's directory.
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
}

fn parse_statistic(s: &str) -> Result<Statistic, String> {
    let (kind, arg) = match s.split_once(':') {
        Some((k, a)) => (k, Some(a)),
        None => (s, None),
    };
    let index = |a: Option<&str>| -> Result<usize, String> {
        a.ok_or_else(|| format!("'{kind}' needs a parameter index, as in {kind}:0"))?
            .parse()
            .map_err(|e| format!("bad index: {e}"))
    };
    Ok(match kind {
        "crb_ratio" => Statistic::CrbRatio { index: index(arg)? },
        "crb_inflation" => Statistic::CrbInflation { index: index(arg)? },
        "kl_ratio" => {
            let list = arg.ok_or("kl_ratio needs the alternative parameter, as in kl_ratio:0.01,0.03")?;
            let theta_prime = list
                .split(',')
                .map(|t| t.trim().parse::<f64>().map_err(|e| format!("bad angle '{t}': {e}")))
                .collect::<Result<_, _>>()?;
            Statistic::KlRatio { theta_prime }
        }
        "w_eigenvalues" => Statistic::WEigenvalues,
        "w_mean" => Statistic::WMean,
        "fim_mean" => Statistic::FimMean,
        other => return Err(format!("unknown statistic '{other}'")),
    })
}

/// Reads a TOML file, or JSON when the extension is `.json`.
pub fn read_config<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).with_context(|| format!("cannot read config {}", path.display()))?;
    if path.extension().is_some_and(|e| e == "json") {
        serde_json::from_str(&text).with_context(|| format!("invalid config {}", path.display()))
    } else {
        toml::from_str(&text).with_context(|| format!("invalid config {}", path.display()))
    }
}

pub fn env_seed() -> Result<Option<u64>> {
    match std::env::var(SEED_ENV) {
        Ok(v) => v
            .trim()
            .parse()
            .map(Some)
            .map_err(|e| anyhow!("{SEED_ENV}='{v}' is not a 64-bit unsigned integer: {e}")),
        Err(std::env::VarError::NotPresent) => Ok(None),
        Err(e) => bail!("{SEED_ENV}: {e}"),
    }
}

fn resolve_seed(flag: Option<u64>, file: Option<u64>) -> Result<u64> {
    Ok(match flag.or(file) {
        Some(s) => s,
        None => env_seed()?.unwrap_or(0),
    })
}

/// Applies scenario flags on top of an optional model from a file.
fn resolve_model(base: Option<ModelSpec>, flags: &ModelArgs) -> Result<ModelSpec> {
    if let Some(thetas) = &flags.theta {
        let n = match (&base, flags.n) {
            (_, Some(n)) => n,
            (Some(ModelSpec::Ula(s)), None) => s.n,
            _ => DEFAULT_N,
        };
        let sources = thetas.iter().map(|&t| Source::new(t, 1.0, 0.0)).collect();
        return Ok(ModelSpec::Ula(UlaScenario::new(n, sources)?));
    }
    match (base, flags.n) {
        (Some(ModelSpec::Ula(mut s)), Some(n)) => {
            s.n = n;
            Ok(ModelSpec::Ula(s))
        }
        (Some(_), Some(_)) => bail!("--n only applies to line-array scenarios"),
        (Some(model), None) => Ok(model),
        (None, n) => Ok(ModelSpec::Ula(UlaScenario::two_source_half_rayleigh(n.unwrap_or(DEFAULT_N)))),
    }
}

fn model_dim(model: &ModelSpec) -> Result<usize> {
    Ok(model.build()?.model.dim())
}

#[derive(Deserialize)]
#[serde(untagged)]
enum FisherFile {
    Full(FisherConfig),
    Scenario(UlaScenario),
}

pub fn fisher_job(a: &FisherArgs) -> Result<Job> {
    let (model, sigma2) = match &a.config {
        Some(path) => match read_config::<FisherFile>(path)? {
            FisherFile::Full(c) => (Some(c.model), Some(c.sigma2)),
            FisherFile::Scenario(s) => (Some(ModelSpec::Ula(s)), None),
        },
        None => (None, None),
    };
    let model = resolve_model(model, &a.model)?;
    let sigma2 = a.model.sigma2.or(sigma2).unwrap_or(1.0);
    Ok(Job::Fisher(FisherConfig { model, sigma2 }))
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct CompressorFile {
    m: Option<usize>,
    n: Option<usize>,
    family: Option<Family>,
    element_variance: Option<f64>,
    seed: Option<u64>,
    radial: Option<RadialLaw>,
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct SimulateFile {
    model: Option<ModelSpec>,
    sigma2: Option<f64>,
    compressor: Option<CompressorFile>,
    trials: Option<usize>,
    statistics: Option<Vec<Statistic>>,
    histogram_bins: Option<usize>,
    alpha: Option<f64>,
    allow_law_violation: Option<bool>,
    seed: Option<u64>,
}

pub fn simulate_job(a: &SimulateArgs) -> Result<Job> {
    let file: SimulateFile = match &a.config {
        Some(path) => read_config(path)?,
        None => SimulateFile::default(),
    };
    let comp = file.compressor.unwrap_or_default();
    let model = resolve_model(file.model, &a.model)?;
    let n = model_dim(&model)?;
    if let Some(cn) = comp.n {
        if cn != n && a.model.n.is_none() && a.model.theta.is_none() {
            bail!("compressor n = {cn} does not match the model's n = {n}");
        }
    }
    let m = a.m.or(comp.m).unwrap_or(n / 2);
    let family = a.family.map(Family::from).or(comp.family).unwrap_or(Family::Gaussian);
    let seed = resolve_seed(a.seed, comp.seed.or(file.seed))?;
    let mut compressor = CompressorSpec::new(m, n, family, seed);
    if let Some(v) = comp.element_variance {
        compressor = compressor.with_variance(v);
    }
    if let Some(r) = comp.radial {
        compressor = compressor.with_radial(r);
    }
    let statistics = if a.statistics.is_empty() {
        file.statistics.unwrap_or_else(|| vec![Statistic::CrbRatio { index: 0 }])
    } else {
        a.statistics.clone()
    };
    let mut config = ExperimentConfig::new(model, compressor, a.trials.or(file.trials).unwrap_or(10_000), statistics);
    config.sigma2 = a.model.sigma2.or(file.sigma2).unwrap_or(1.0);
    if let Some(b) = a.bins.or(file.histogram_bins) {
        config.histogram_bins = b;
    }
    if let Some(alpha) = a.alpha.or(file.alpha) {
        config.alpha = alpha;
    }
    config.allow_law_violation = a.allow_law_violation || file.allow_law_violation.unwrap_or(false);
    Ok(Job::Simulate(config))
}

pub fn plan_job(a: &PlanArgs) -> Job {
    Job::Plan(PlanConfig {
        n: a.n,
        p: a.p,
        kappas: if a.kappa.is_empty() { default_kappas() } else { a.kappa.clone() },
        confidences: if a.confidence.is_empty() { DEFAULT_CONFIDENCES.to_vec() } else { a.confidence.clone() },
    })
}

pub fn ellipse_job(a: &EllipseArgs) -> Result<Job> {
    let model = resolve_model(None, &a.model)?;
    let n = model_dim(&model)?;
    let compressor = CompressorSpec::new(a.m.unwrap_or(n / 2), n, a.family.into(), resolve_seed(a.seed, None)?);
    Ok(Job::Ellipse(EllipseConfig {
        model,
        compressor,
        sigma2: a.model.sigma2.unwrap_or(1.0),
        curves: a.curves,
        points: a.points,
        r2: a.r2,
    }))
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct FiguresFile {
    n: Option<usize>,
    m: Option<usize>,
    family: Option<Family>,
    seed: Option<u64>,
    trials: Option<usize>,
    bins: Option<usize>,
    alpha: Option<f64>,
    curves: Option<usize>,
    points: Option<usize>,
    kappas: Option<Vec<f64>>,
    confidences: Option<Vec<f64>>,
}

pub fn figures_job(a: &FiguresArgs) -> Result<Job> {
    let f: FiguresFile = match &a.config {
        Some(path) => read_config(path)?,
        None => FiguresFile::default(),
    };
    let n = a.n.or(f.n).unwrap_or(DEFAULT_N);
    Ok(Job::Figures(FiguresConfig {
        n,
        m: a.m.or(f.m).unwrap_or(n / 2),
        family: a.family.map(Family::from).or(f.family).unwrap_or(Family::Gaussian),
        seed: resolve_seed(a.seed, f.seed)?,
        trials: a.trials.or(f.trials).unwrap_or(10_000),
        bins: a.bins.or(f.bins).unwrap_or(50),
        alpha: a.alpha.or(f.alpha).unwrap_or(0.01),
        curves: a.curves.or(f.curves).unwrap_or(100),
        points: a.points.or(f.points).unwrap_or(200),
        kappas: a.kappas.clone().or(f.kappas).unwrap_or_else(default_kappas),
        confidences: a.confidences.clone().or(f.confidences).unwrap_or_else(|| DEFAULT_CONFIDENCES.to_vec()),
    }))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn statistic_forms() {
        assert_eq!(parse_statistic("crb_ratio:1").unwrap(), Statistic::CrbRatio { index: 1 });
        assert_eq!(parse_statistic("w_mean").unwrap(), Statistic::WMean);
        assert_eq!(
            parse_statistic("kl_ratio:0.1,-0.2").unwrap(),
            Statistic::KlRatio { theta_prime: vec![0.1, -0.2] }
        );
        assert!(parse_statistic("crb_ratio").is_err());
        assert!(parse_statistic("bogus").is_err());
    }

    #[test]
    fn model_resolution() {
        let flags = ModelArgs { n: Some(32), ..Default::default() };
        match resolve_model(None, &flags).unwrap() {
            ModelSpec::Ula(s) => assert_eq!(s, UlaScenario::two_source_half_rayleigh(32)),
            other => panic!("{other:?}"),
        }
        let flags = ModelArgs { theta: Some(vec![0.1, 0.2, 0.3]), ..Default::default() };
        match resolve_model(None, &flags).unwrap() {
            ModelSpec::Ula(s) => assert_eq!((s.n, s.sources.len()), (DEFAULT_N, 3)),
            other => panic!("{other:?}"),
        }
        let random = ModelSpec::RandomJacobian { n: 10, p: 2, seed: 1 };
        assert!(resolve_model(Some(random), &ModelArgs { n: Some(12), ..Default::default() }).is_err());
    }
}
