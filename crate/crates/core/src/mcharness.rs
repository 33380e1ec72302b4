//! Monte Carlo engine for the compression laws.
//!
//! Each trial draws one compressor from its own counter-based stream, computes
//! the requested statistics, and the results are reduced in trial order. The
//! outcome is therefore bit-identical for any worker count.

use std::collections::BTreeMap;
use std::time::Instant;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::betalaw::{self, BetaLaw};
use crate::cxla;
use crate::fisher::{self, FimResult, RowSpace};
use crate::randcomp::{self, CompressorSpec, Family};
use crate::sigmodel::{LinearModel, SignalModel, UlaScenario};
use crate::summation::{mean_variance, KahanSum};
use crate::{ComplexMatrix, ComplexVector, Error, Result};

/// Largest tolerated fraction of excluded trials.
pub const MAX_EXCLUDED_FRACTION: f64 = 1e-3;

/// Minimum sample count for a KS test.
pub const KS_MIN_SAMPLES: usize = 100;

/// Stream index reserved for drawing a random Jacobian, so it never
/// coincides with a compressor trial stream.
const MODEL_STREAM: u64 = u64::MAX;

/// Source of the Jacobian `G`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelSpec {
    /// Uniform line array evaluated at its stored angles.
    Ula(UlaScenario),
    /// Linear model with an explicit `n × p` Jacobian, given as rows of
    /// `[re, im]` pairs. The nominal parameter defaults to zero.
    Linear {
        g: Vec<Vec<[f64; 2]>>,
        #[serde(default)]
        theta: Option<Vec<f64>>,
    },
    /// Linear model whose Jacobian has i.i.d. complex normal entries.
    RandomJacobian { n: usize, p: usize, seed: u64 },
}

/// A model ready for evaluation at its nominal parameter.
pub struct BuiltModel {
    pub model: Box<dyn SignalModel>,
    pub theta: Vec<f64>,
}

impl BuiltModel {
    pub fn jacobian(&self) -> ComplexMatrix {
        self.model.jacobian(&self.theta)
    }
}

impl ModelSpec {
    pub fn build(&self) -> Result<BuiltModel> {
        match self {
            ModelSpec::Ula(s) => {
                s.validate()?;
                Ok(BuiltModel { theta: s.thetas(), model: Box::new(s.clone()) })
            }
            ModelSpec::Linear { g, theta } => {
                let g = matrix_from_pairs(g)?;
                let p = g.ncols();
                let model = LinearModel::new(g)?;
                let theta = theta.clone().unwrap_or_else(|| vec![0.0; p]);
                if theta.len() != p {
                    return Err(Error::BadSpec(format!("nominal parameter has length {}, model has p = {p}", theta.len())));
                }
                Ok(BuiltModel { model: Box::new(model), theta })
            }
            ModelSpec::RandomJacobian { n, p, seed } => {
                if *p == 0 || n <= p {
                    return Err(Error::BadSpec(format!("random Jacobian needs n > p >= 1, got n = {n}, p = {p}")));
                }
                let spec = CompressorSpec::new(*p, *n, Family::Gaussian, *seed);
                let g = randcomp::sample(&spec, &mut randcomp::derive_stream(*seed, MODEL_STREAM))?.transpose();
                Ok(BuiltModel { model: Box::new(LinearModel::new(g)?), theta: vec![0.0; *p] })
            }
        }
    }
}

fn matrix_from_pairs(rows: &[Vec<[f64; 2]>]) -> Result<ComplexMatrix> {
    let n = rows.len();
    let p = rows.first().map_or(0, Vec::len);
    if n == 0 || p == 0 || rows.iter().any(|r| r.len() != p) {
        return Err(Error::BadSpec("Jacobian rows must be non-empty and of equal length".into()));
    }
    Ok(ComplexMatrix::from_fn(n, p, |i, j| Complex64::new(rows[i][j][0], rows[i][j][1])))
}

/// A per-trial quantity to record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Statistic {
    /// `(J⁻¹)ᵢᵢ / (Ĵ⁻¹)ᵢᵢ`, in `(0, 1]`.
    CrbRatio { index: usize },
    /// `(Ĵ⁻¹)ᵢᵢ / (J⁻¹)ᵢᵢ`, the CRB inflation factor.
    CrbInflation { index: usize },
    /// `D̂ / D` between the nominal parameter and `theta_prime`.
    KlRatio { theta_prime: Vec<f64> },
    /// All eigenvalues of `W`.
    WEigenvalues,
    /// Running mean of `W`.
    WMean,
    /// Running mean of `Ĵ`.
    FimMean,
}

impl Statistic {
    pub fn name(&self) -> String {
        match self {
            Statistic::CrbRatio { index } => format!("crb_ratio_{index}"),
            Statistic::CrbInflation { index } => format!("crb_inflation_{index}"),
            Statistic::KlRatio { .. } => "kl_ratio".into(),
            Statistic::WEigenvalues => "w_eigenvalues".into(),
            Statistic::WMean => "w_mean".into(),
            Statistic::FimMean => "fim_mean".into(),
        }
    }

    fn is_matrix(&self) -> bool {
        matches!(self, Statistic::WMean | Statistic::FimMean)
    }

    fn needs_w(&self) -> bool {
        matches!(self, Statistic::WEigenvalues | Statistic::WMean)
    }
}

fn default_sigma2() -> f64 {
    1.0
}

fn default_trials() -> usize {
    10_000
}

fn default_bins() -> usize {
    50
}

fn default_alpha() -> f64 {
    0.01
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub model: ModelSpec,
    #[serde(default = "default_sigma2")]
    pub sigma2: f64,
    /// Carries the campaign seed.
    pub compressor: CompressorSpec,
    #[serde(default = "default_trials")]
    pub trials: usize,
    pub statistics: Vec<Statistic>,
    #[serde(default = "default_bins")]
    pub histogram_bins: usize,
    /// Significance level of the KS tests.
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    /// Permit `m > n − p`, where the closed-form laws no longer apply.
    #[serde(default)]
    pub allow_law_violation: bool,
}

impl ExperimentConfig {
    pub fn new(model: ModelSpec, compressor: CompressorSpec, trials: usize, statistics: Vec<Statistic>) -> Self {
        ExperimentConfig {
            model,
            sigma2: 1.0,
            compressor,
            trials,
            statistics,
            histogram_bins: default_bins(),
            alpha: default_alpha(),
            allow_law_violation: false,
        }
    }

    pub fn seed(&self) -> u64 {
        self.compressor.seed
    }

    /// Checks the config against the built model; returns `(n, m, p)`.
    fn check(&self, model: &BuiltModel) -> Result<(usize, usize, usize)> {
        self.compressor.validate()?;
        let (n, p, m) = (model.model.dim(), model.model.num_params(), self.compressor.m);
        if self.compressor.n != n {
            return Err(Error::BadSpec(format!("compressor acts on n = {}, model has n = {n}", self.compressor.n)));
        }
        if self.trials == 0 {
            return Err(Error::BadSpec("trials must be at least 1".into()));
        }
        if self.statistics.is_empty() {
            return Err(Error::BadSpec("no statistics requested".into()));
        }
        if !(self.sigma2 > 0.0 && self.sigma2.is_finite()) {
            return Err(Error::BadSpec(format!("noise variance must be positive, got {}", self.sigma2)));
        }
        if self.histogram_bins == 0 {
            return Err(Error::BadSpec("histogram_bins must be at least 1".into()));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::BadSpec(format!("alpha must lie in (0, 1), got {}", self.alpha)));
        }
        if m <= p {
            return Err(Error::BadSpec(format!("need m > p, got m = {m}, p = {p}")));
        }
        if m + p > n && !self.allow_law_violation {
            return Err(Error::BadSpec(format!(
                "m = {m} exceeds n - p = {}; set allow_law_violation to run anyway",
                n - p
            )));
        }
        let mut names = std::collections::BTreeSet::new();
        for s in &self.statistics {
            if !names.insert(s.name()) {
                return Err(Error::BadSpec(format!("statistic '{}' requested twice", s.name())));
            }
            match s {
                Statistic::CrbRatio { index } | Statistic::CrbInflation { index } if *index >= p => {
                    return Err(Error::BadSpec(format!("parameter index {index} out of range for p = {p}")));
                }
                Statistic::KlRatio { theta_prime } if theta_prime.len() != p => {
                    return Err(Error::BadSpec(format!("theta_prime has length {}, model has p = {p}", theta_prime.len())));
                }
                _ => {}
            }
        }
        Ok((n, m, p))
    }

    /// True when the closed-form laws hold for this geometry.
    fn laws_apply(n: usize, m: usize, p: usize) -> bool {
        m + p <= n && m > p
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KsReport {
    pub statistic: f64,
    pub critical: f64,
    pub alpha: f64,
    pub pass: bool,
}

/// `c(α)` of the asymptotic Kolmogorov distribution.
pub fn ks_coefficient(alpha: f64) -> Result<f64> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::DomainError(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    Ok(if (alpha - 0.01).abs() < 1e-12 {
        1.628
    } else if (alpha - 0.05).abs() < 1e-12 {
        1.358
    } else {
        (-0.5 * (alpha / 2.0).ln()).sqrt()
    })
}

fn check_samples(xs: &[f64]) -> Result<()> {
    if xs.len() < KS_MIN_SAMPLES {
        return Err(Error::TooFewSamples { required: KS_MIN_SAMPLES, got: xs.len() });
    }
    if xs.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite);
    }
    Ok(())
}

fn sorted(xs: &[f64]) -> Vec<f64> {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    v
}

/// One-sample KS test, `D = sup |F_N − F|`, passing when `D < c(α)/√N`.
pub fn ks_one_sample(samples: &[f64], cdf: impl Fn(f64) -> f64, alpha: f64) -> Result<KsReport> {
    check_samples(samples)?;
    let c = ks_coefficient(alpha)?;
    let xs = sorted(samples);
    let n = xs.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &x) in xs.iter().enumerate() {
        let f = cdf(x);
        d = d.max(f - i as f64 / n).max((i + 1) as f64 / n - f);
    }
    let critical = c / n.sqrt();
    Ok(KsReport { statistic: d, critical, alpha, pass: d < critical })
}

/// Two-sample KS test with critical value `c(α)·√((N₁+N₂)/(N₁N₂))`.
pub fn ks_two_sample(a: &[f64], b: &[f64], alpha: f64) -> Result<KsReport> {
    check_samples(a)?;
    check_samples(b)?;
    let c = ks_coefficient(alpha)?;
    let (xa, xb) = (sorted(a), sorted(b));
    let (na, nb) = (xa.len() as f64, xb.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut d: f64 = 0.0;
    while i < xa.len() && j < xb.len() {
        // Step past every copy of the smaller value so ties move both cdfs together.
        let x = xa[i].min(xb[j]);
        while i < xa.len() && xa[i] <= x {
            i += 1;
        }
        while j < xb.len() && xb[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    let critical = c * ((na + nb) / (na * nb)).sqrt();
    Ok(KsReport { statistic: d, critical, alpha, pass: d < critical })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    /// `bins + 1` increasing edges.
    pub edges: Vec<f64>,
    pub counts: Vec<u64>,
    /// Multiply a count by this to get a pdf-comparable height, `1/(N·width)`.
    pub density_scale: f64,
}

impl Histogram {
    pub fn densities(&self) -> Vec<f64> {
        self.counts.iter().map(|&c| c as f64 * self.density_scale).collect()
    }

    pub fn centers(&self) -> Vec<f64> {
        self.edges.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect()
    }
}

/// Uniform-bin histogram over `range` (default `[min, max]`).
///
/// Samples outside an explicit range are not counted; the last bin is closed.
/// A degenerate range is widened to unit width around its value.
pub fn histogram(samples: &[f64], bins: usize, range: Option<(f64, f64)>) -> Result<Histogram> {
    if bins == 0 {
        return Err(Error::DomainError("histogram needs at least one bin".into()));
    }
    if samples.is_empty() {
        return Err(Error::TooFewSamples { required: 1, got: 0 });
    }
    if samples.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite);
    }
    let (mut lo, mut hi) = match range {
        Some((lo, hi)) if lo.is_finite() && hi.is_finite() && lo <= hi => (lo, hi),
        Some((lo, hi)) => return Err(Error::DomainError(format!("invalid histogram range [{lo}, {hi}]"))),
        None => samples
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &x| (l.min(x), h.max(x))),
    };
    if lo == hi {
        lo -= 0.5;
        hi += 0.5;
    }
    let width = (hi - lo) / bins as f64;
    let edges: Vec<f64> = (0..=bins)
        .map(|k| if k == bins { hi } else { lo + k as f64 * width })
        .collect();
    let mut counts = vec![0u64; bins];
    for &x in samples {
        if x < lo || x > hi {
            continue;
        }
        let k = (((x - lo) / width) as usize).min(bins - 1);
        counts[k] += 1;
    }
    Ok(Histogram { edges, counts, density_scale: 1.0 / (samples.len() as f64 * width) })
}

/// Closed-form reference for a scalar statistic.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Reference {
    /// Beta shape parameters of the statistic, or of its reciprocal when `reciprocal`.
    pub a: f64,
    pub b: f64,
    pub reciprocal: bool,
    pub mean: Option<f64>,
    pub variance: Option<f64>,
}

impl Reference {
    fn direct(law: BetaLaw) -> Self {
        Reference { a: law.a(), b: law.b(), reciprocal: false, mean: Some(law.mean()), variance: Some(law.variance()) }
    }

    fn law(&self) -> BetaLaw {
        BetaLaw::new(self.a, self.b).expect("validated shapes")
    }

    /// cdf of the statistic itself.
    pub fn cdf(&self, x: f64) -> f64 {
        let law = self.law();
        if self.reciprocal {
            if x <= 1.0 {
                0.0
            } else {
                law.sf(1.0 / x).unwrap_or(f64::NAN)
            }
        } else {
            law.cdf(x.clamp(0.0, 1.0)).unwrap_or(f64::NAN)
        }
    }

    pub fn pdf(&self, x: f64) -> f64 {
        let law = self.law();
        if self.reciprocal {
            if x <= 1.0 {
                0.0
            } else {
                law.pdf(1.0 / x).unwrap_or(0.0) / (x * x)
            }
        } else if (0.0..=1.0).contains(&x) {
            law.pdf(x).unwrap_or(0.0)
        } else {
            0.0
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatisticSummary {
    pub count: usize,
    pub mean: f64,
    pub variance: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reference: Option<Reference>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ks: Option<KsReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatrixSummary {
    pub mean_re: Vec<Vec<f64>>,
    pub mean_im: Vec<Vec<f64>>,
    pub reference_re: Vec<Vec<f64>>,
    pub reference_im: Vec<Vec<f64>>,
    /// `‖mean − reference‖_F`.
    pub frobenius_error: f64,
}

/// Values of one statistic in trial order.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SampleSet {
    pub trials: Vec<u64>,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ExperimentSummary {
    pub config: ExperimentConfig,
    pub n: usize,
    pub m: usize,
    pub p: usize,
    pub trials: usize,
    pub excluded_trials: usize,
    pub statistics: BTreeMap<String, StatisticSummary>,
    #[serde(skip_serializing_if = "BTreeMap::is_empty")]
    pub matrices: BTreeMap<String, MatrixSummary>,
    #[serde(skip)]
    pub samples: BTreeMap<String, SampleSet>,
    #[serde(skip)]
    pub histograms: BTreeMap<String, Histogram>,
    /// Wall-clock seconds; not part of the reproducible payload.
    #[serde(skip)]
    pub elapsed_seconds: f64,
}

/// Per-campaign constants shared by every trial.
struct Prepared {
    g: ComplexMatrix,
    crb_full: Vec<f64>,
    inv_sqrt_j: Option<ComplexMatrix>,
    kl_delta: Option<(ComplexVector, f64)>,
}

struct TrialOutput {
    scalars: Vec<Vec<f64>>,
    matrices: Vec<Option<ComplexMatrix>>,
}

fn prepare(config: &ExperimentConfig, model: &BuiltModel, full: &FimResult) -> Result<Prepared> {
    let crb_full = if config
        .statistics
        .iter()
        .any(|s| matches!(s, Statistic::CrbRatio { .. } | Statistic::CrbInflation { .. }))
    {
        full.crbs()?
    } else {
        Vec::new()
    };
    let inv_sqrt_j = if config.statistics.iter().any(Statistic::needs_w) {
        Some(cxla::hermitian_inv_sqrt(full.matrix())?)
    } else {
        None
    };
    let kl_delta = match config.statistics.iter().find_map(|s| match s {
        Statistic::KlRatio { theta_prime } => Some(theta_prime),
        _ => None,
    }) {
        Some(theta_prime) => {
            let delta = model.model.mean(&model.theta) - model.model.mean(theta_prime);
            let energy = delta.norm_squared();
            if !(energy > 0.0) {
                return Err(Error::DomainError("theta_prime gives the same mean as the nominal parameter".into()));
            }
            Some((delta, energy))
        }
        None => None,
    };
    Ok(Prepared { g: full.jacobian().clone(), crb_full, inv_sqrt_j, kl_delta })
}

fn run_trial(config: &ExperimentConfig, prep: &Prepared, trial: u64) -> Result<TrialOutput> {
    let phi = config.compressor.draw(trial)?;
    let row_space = RowSpace::new(&phi)?;
    let compressed = row_space.compress_fim(&prep.g, config.sigma2)?;
    let w = match &prep.inv_sqrt_j {
        Some(s) => Some(fisher::normalize_with(s, compressed.matrix())?),
        None => None,
    };
    let mut scalars = Vec::with_capacity(config.statistics.len());
    let mut matrices = Vec::with_capacity(config.statistics.len());
    for stat in &config.statistics {
        let (values, matrix) = match stat {
            Statistic::CrbRatio { index } => (vec![prep.crb_full[*index] / fisher::crb(&compressed, *index)?], None),
            Statistic::CrbInflation { index } => (vec![fisher::crb(&compressed, *index)? / prep.crb_full[*index]], None),
            Statistic::KlRatio { .. } => {
                let (delta, energy) = prep.kl_delta.as_ref().expect("prepared");
                (vec![row_space.projected_energy(delta)? / energy], None)
            }
            Statistic::WEigenvalues => (w.as_ref().expect("prepared").eigenvalues().to_vec(), None),
            Statistic::WMean => (Vec::new(), Some(w.as_ref().expect("prepared").matrix().as_matrix().clone())),
            Statistic::FimMean => (Vec::new(), Some(compressed.matrix().as_matrix().clone())),
        };
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite);
        }
        scalars.push(values);
        matrices.push(matrix);
    }
    Ok(TrialOutput { scalars, matrices })
}

/// Trial failures that the campaign tolerates (and counts).
fn is_excludable(e: &Error) -> bool {
    matches!(
        e,
        Error::SingularFim { .. } | Error::RankDeficient { .. } | Error::NotPositiveDefinite { .. } | Error::SingularMatrix
    )
}

fn reference_for(stat: &Statistic, n: usize, m: usize, p: usize) -> Option<Reference> {
    if !ExperimentConfig::laws_apply(n, m, p) {
        return None;
    }
    match stat {
        Statistic::CrbRatio { .. } => betalaw::crb_ratio_law(n, m, p).ok().map(Reference::direct),
        Statistic::CrbInflation { .. } => betalaw::crb_ratio_law(n, m, p).ok().map(|law| Reference {
            a: law.a(),
            b: law.b(),
            reciprocal: true,
            mean: betalaw::mean_crb_factor(n, m, p).ok(),
            variance: betalaw::var_crb_factor(n, m, p).ok(),
        }),
        Statistic::KlRatio { .. } => betalaw::kl_ratio_law(n, m).ok().map(Reference::direct),
        // For one parameter W is itself Beta(m, n − m).
        Statistic::WEigenvalues if p == 1 => betalaw::kl_ratio_law(n, m).ok().map(Reference::direct),
        _ => None,
    }
}

fn split_matrix(a: &ComplexMatrix) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
    let rows = |f: fn(&Complex64) -> f64| -> Vec<Vec<f64>> {
        (0..a.nrows()).map(|i| (0..a.ncols()).map(|j| f(&a[(i, j)])).collect()).collect()
    };
    (rows(|z| z.re), rows(|z| z.im))
}

/// Runs the campaign on the global rayon pool.
pub fn run(config: &ExperimentConfig) -> Result<ExperimentSummary> {
    run_with_threads(config, None)
}

/// Runs the campaign with at most `threads` workers. The result does not depend on it.
pub fn run_with_threads(config: &ExperimentConfig, threads: Option<usize>) -> Result<ExperimentSummary> {
    let start = Instant::now();
    let model = config.model.build()?;
    let (n, m, p) = config.check(&model)?;
    let full = fisher::fim(&model.jacobian(), config.sigma2)?;
    let prep = prepare(config, &model, &full)?;

    let work = || -> Vec<Result<TrialOutput>> {
        (0..config.trials as u64)
            .into_par_iter()
            .map(|t| run_trial(config, &prep, t))
            .collect()
    };
    let outputs = match threads {
        Some(k) => rayon::ThreadPoolBuilder::new()
            .num_threads(k.max(1))
            .build()
            .map_err(|e| Error::BadSpec(format!("cannot start worker pool: {e}")))?
            .install(work),
        None => work(),
    };

    let k = config.statistics.len();
    let mut samples: Vec<SampleSet> = vec![SampleSet::default(); k];
    let mut sums: Vec<Vec<(KahanSum, KahanSum)>> = vec![vec![(KahanSum::default(), KahanSum::default()); p * p]; k];
    let mut excluded = 0usize;
    for (t, out) in outputs.into_iter().enumerate() {
        let out = match out {
            Ok(o) => o,
            Err(e) if is_excludable(&e) => {
                excluded += 1;
                continue;
            }
            Err(e) => return Err(e),
        };
        for (s, (values, matrix)) in out.scalars.into_iter().zip(out.matrices).enumerate() {
            for v in values {
                samples[s].trials.push(t as u64);
                samples[s].values.push(v);
            }
            if let Some(a) = matrix {
                for (acc, z) in sums[s].iter_mut().zip(a.iter()) {
                    acc.0.add(z.re);
                    acc.1.add(z.im);
                }
            }
        }
    }
    if excluded as f64 > MAX_EXCLUDED_FRACTION * config.trials as f64 {
        return Err(Error::TooManyExcluded { excluded, trials: config.trials });
    }
    let kept = config.trials - excluded;
    if kept == 0 {
        return Err(Error::TooManyExcluded { excluded, trials: config.trials });
    }

    let mut statistics = BTreeMap::new();
    let mut matrices = BTreeMap::new();
    let mut histograms = BTreeMap::new();
    let mut sample_map = BTreeMap::new();
    for ((stat, set), sum) in config.statistics.iter().zip(samples).zip(sums) {
        let name = stat.name();
        if stat.is_matrix() {
            // nalgebra storage is column-major; rebuild in the same order.
            let mean = ComplexMatrix::from_iterator(
                p,
                p,
                sum.iter().map(|(re, im)| Complex64::new(re.value(), im.value()) / kept as f64),
            );
            let scale = betalaw::mean_fim_scale(n, m)?;
            let reference = match stat {
                Statistic::WMean => ComplexMatrix::identity(p, p) * Complex64::from(scale),
                _ => full.matrix().as_matrix() * Complex64::from(scale),
            };
            let err = (&mean - &reference).iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            let (mean_re, mean_im) = split_matrix(&mean);
            let (reference_re, reference_im) = split_matrix(&reference);
            matrices.insert(name, MatrixSummary { mean_re, mean_im, reference_re, reference_im, frobenius_error: err });
            continue;
        }
        let (mean, variance) = mean_variance(&set.values);
        let reference = reference_for(stat, n, m, p);
        let ks = match &reference {
            Some(r) if set.values.len() >= KS_MIN_SAMPLES => Some(ks_one_sample(&set.values, |x| r.cdf(x), config.alpha)?),
            _ => None,
        };
        histograms.insert(name.clone(), histogram(&set.values, config.histogram_bins, None)?);
        statistics.insert(name.clone(), StatisticSummary { count: set.values.len(), mean, variance, reference, ks });
        sample_map.insert(name, set);
    }

    Ok(ExperimentSummary {
        config: config.clone(),
        n,
        m,
        p,
        trials: config.trials,
        excluded_trials: excluded,
        statistics,
        matrices,
        samples: sample_map,
        histograms,
        elapsed_seconds: start.elapsed().as_secs_f64(),
    })
}
