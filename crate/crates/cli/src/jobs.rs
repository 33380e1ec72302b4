//! Fully resolved command configurations and their execution.
//!
//! A `Job` is what a manifest records; replaying it rewrites the same payloads.

use anyhow::{bail, Result};
use crb_compress::betalaw;
use crb_compress::fisher::{self, RowSpace};
use crb_compress::mcharness::{self, ExperimentConfig, ExperimentSummary, ModelSpec, Statistic};
use crb_compress::planner::{self, CurveRow};
use crb_compress::randcomp::{CompressorSpec, Family};
use crb_compress::sigmodel::UlaScenario;
use serde::{Deserialize, Serialize};

use crate::output::{num, OutputDir};
use crate::svg::{Plot, PALETTE};

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FisherConfig {
    pub model: ModelSpec,
    #[serde(default = "one")]
    pub sigma2: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanConfig {
    pub n: usize,
    pub p: usize,
    pub kappas: Vec<f64>,
    pub confidences: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EllipseConfig {
    pub model: ModelSpec,
    pub compressor: CompressorSpec,
    #[serde(default = "one")]
    pub sigma2: f64,
    /// Number of compressed loci.
    pub curves: usize,
    /// Points per locus.
    pub points: usize,
    /// Level `r²`; defaults to `J₁₁`.
    #[serde(default)]
    pub r2: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FiguresConfig {
    pub n: usize,
    pub m: usize,
    pub family: Family,
    pub seed: u64,
    pub trials: usize,
    pub bins: usize,
    pub alpha: f64,
    pub curves: usize,
    pub points: usize,
    pub kappas: Vec<f64>,
    pub confidences: Vec<f64>,
}

impl FiguresConfig {
    pub fn scenario(&self) -> ModelSpec {
        ModelSpec::Ula(UlaScenario::two_source_half_rayleigh(self.n))
    }

    fn compressor(&self) -> CompressorSpec {
        CompressorSpec::new(self.m, self.n, self.family, self.seed)
    }
}

/// Default inflation grid for design curves.
pub fn default_kappas() -> Vec<f64> {
    (0..=179).map(|k| ((105 + 5 * k) as f64) / 100.0).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "command", content = "config", rename_all = "snake_case")]
pub enum Job {
    Fisher(FisherConfig),
    Simulate(ExperimentConfig),
    Plan(PlanConfig),
    Ellipse(EllipseConfig),
    Figures(FiguresConfig),
}

impl Job {
    pub fn name(&self) -> &'static str {
        match self {
            Job::Fisher(_) => "fisher",
            Job::Simulate(_) => "simulate",
            Job::Plan(_) => "plan",
            Job::Ellipse(_) => "ellipse",
            Job::Figures(_) => "figures",
        }
    }

    pub fn seed(&self) -> Option<u64> {
        match self {
            Job::Simulate(c) => Some(c.seed()),
            Job::Ellipse(c) => Some(c.compressor.seed),
            Job::Figures(c) => Some(c.seed),
            Job::Fisher(_) | Job::Plan(_) => None,
        }
    }

    pub fn execute(&self, out: &mut OutputDir, threads: Option<usize>) -> Result<()> {
        match self {
            Job::Fisher(c) => out.json("fisher.json", &fisher_report(c)?),
            Job::Simulate(c) => {
                let summary = mcharness::run_with_threads(c, threads)?;
                write_summary(out, "", &summary)
            }
            Job::Plan(c) => {
                let rows = planner::curve(c.n, c.p, &c.kappas, &c.confidences)?;
                write_curve(out, "plan.csv", &rows)
            }
            Job::Ellipse(c) => write_ellipses(out, "ellipses", c),
            Job::Figures(c) => figures(out, c, threads),
        }
    }
}

#[derive(Debug, Serialize)]
pub struct FisherReport {
    pub n: usize,
    pub p: usize,
    pub sigma2: f64,
    pub theta: Vec<f64>,
    pub fim_re: Vec<Vec<f64>>,
    pub fim_im: Vec<Vec<f64>>,
    pub crb: Vec<f64>,
    pub crb_angle_form: Vec<f64>,
    /// Principal angle of each Jacobian column to the span of the others, radians.
    pub principal_angles: Vec<f64>,
}

pub fn fisher_report(c: &FisherConfig) -> Result<FisherReport> {
    let built = c.model.build()?;
    let g = built.jacobian();
    let f = fisher::fim(&g, c.sigma2)?;
    let p = f.p();
    let j = f.matrix().as_matrix();
    let part = |im: bool| -> Vec<Vec<f64>> {
        (0..p).map(|r| (0..p).map(|s| if im { j[(r, s)].im } else { j[(r, s)].re }).collect()).collect()
    };
    Ok(FisherReport {
        n: g.nrows(),
        p,
        sigma2: c.sigma2,
        theta: built.theta.clone(),
        fim_re: part(false),
        fim_im: part(true),
        crb: f.crbs()?,
        crb_angle_form: (0..p).map(|i| fisher::crb_angle_form(&g, c.sigma2, i)).collect::<Result<_, _>>()?,
        principal_angles: (0..p).map(|i| fisher::principal_angle(&g, i)).collect::<Result<_, _>>()?,
    })
}

fn hist_name(prefix: &str, stat: &str) -> String {
    format!("{prefix}histogram_{stat}.csv")
}

/// `summary.json`, `samples.csv` and one histogram per scalar statistic.
pub fn write_summary(out: &mut OutputDir, prefix: &str, s: &ExperimentSummary) -> Result<()> {
    // Wall-clock time goes to the manifest so that reruns are byte-identical.
    let mut doc = serde_json::to_value(s)?;
    if let Some(obj) = doc.as_object_mut() {
        obj.remove("elapsed_seconds");
    }
    out.json(&format!("{prefix}summary.json"), &doc)?;
    let rows = s.samples.iter().flat_map(|(name, set)| {
        set.trials
            .iter()
            .zip(&set.values)
            .map(move |(t, v)| vec![t.to_string(), name.clone(), num(*v)])
    });
    out.csv(&format!("{prefix}samples.csv"), &["trial", "statistic", "value"], rows)?;
    for (name, h) in &s.histograms {
        let rows = h
            .edges
            .windows(2)
            .zip(&h.counts)
            .map(|(e, &c)| vec![num(e[0]), num(e[1]), c.to_string(), num(c as f64 * h.density_scale)]);
        out.csv(&hist_name(prefix, name), &["bin_left", "bin_right", "count", "density"], rows)?;
    }
    Ok(())
}

pub fn write_curve(out: &mut OutputDir, name: &str, rows: &[CurveRow]) -> Result<()> {
    out.csv(name, &["kappa", "confidence", "m", "ratio"], rows.iter().map(curve_record))
}

pub fn curve_record(r: &CurveRow) -> Vec<String> {
    vec![
        num(r.kappa),
        num(r.confidence),
        r.m.map(|m| m.to_string()).unwrap_or_default(),
        r.ratio.map(num).unwrap_or_default(),
    ]
}

/// Uncompressed locus (curve 0) and one locus per compressor draw.
pub struct EllipseSet {
    pub loci: Vec<Vec<[f64; 2]>>,
    /// `λ_max(Re(J)⁻¹ Re(Ĵ))` per compressed locus.
    pub enclosure: Vec<f64>,
    pub r2: f64,
}

pub fn ellipse_set(c: &EllipseConfig) -> Result<EllipseSet> {
    let built = c.model.build()?;
    let g = built.jacobian();
    if g.ncols() != 2 {
        bail!("ellipses need a two-parameter model, got p = {}", g.ncols());
    }
    if c.compressor.n != g.nrows() {
        bail!("compressor acts on n = {}, model has n = {}", c.compressor.n, g.nrows());
    }
    let full = fisher::fim(&g, c.sigma2)?;
    let r2 = c.r2.unwrap_or(full.matrix().as_matrix()[(0, 0)].re);
    let mut loci = vec![planner::ellipse_locus(full.matrix(), r2, c.points)?];
    let mut enclosure = Vec::with_capacity(c.curves);
    for t in 0..c.curves as u64 {
        let compressed = RowSpace::new(&c.compressor.draw(t)?)?.compress_fim(&g, c.sigma2)?;
        enclosure.push(planner::enclosure_ratio(full.matrix(), compressed.matrix())?);
        loci.push(planner::ellipse_locus(compressed.matrix(), r2, c.points)?);
    }
    Ok(EllipseSet { loci, enclosure, r2 })
}

fn closed(locus: &[[f64; 2]]) -> Vec<(f64, f64)> {
    locus.iter().chain(locus.first()).map(|e| (e[0], e[1])).collect()
}

fn write_ellipses(out: &mut OutputDir, stem: &str, c: &EllipseConfig) -> Result<()> {
    let set = ellipse_set(c)?;
    let rows = set
        .loci
        .iter()
        .enumerate()
        .flat_map(|(id, locus)| locus.iter().map(move |e| vec![id.to_string(), num(e[0]), num(e[1])]));
    out.csv(&format!("{stem}.csv"), &["curve_id", "x", "y"], rows)?;
    out.csv(
        &format!("{stem}_enclosure.csv"),
        &["curve_id", "lambda_max"],
        set.enclosure.iter().enumerate().map(|(i, l)| vec![(i + 1).to_string(), num(*l)]),
    )?;
    let mut plot = Plot::new(
        &format!("Concentration ellipses at r² = {:.4}, n = {}, m = {}", set.r2, c.compressor.n, c.compressor.m),
        "error in parameter 1",
        "error in parameter 2",
    )
    .equal_aspect();
    for (i, locus) in set.loci.iter().enumerate().skip(1) {
        plot.faint_line(closed(locus), PALETTE[0], (i == 1).then_some("after compression"));
    }
    plot.line(closed(&set.loci[0]), PALETTE[1], 2.5, Some("before compression"));
    out.text(&format!("{stem}.svg"), &plot.render())
}

fn figures(out: &mut OutputDir, c: &FiguresConfig, threads: Option<usize>) -> Result<()> {
    // Histogram of the CRB ratio against its beta law.
    let mut exp = ExperimentConfig::new(c.scenario(), c.compressor(), c.trials, vec![Statistic::CrbRatio { index: 0 }]);
    exp.histogram_bins = c.bins;
    exp.alpha = c.alpha;
    let summary = mcharness::run_with_threads(&exp, threads)?;
    write_summary(out, "fig1_", &summary)?;
    let law = betalaw::crb_ratio_law(c.n, c.m, 2)?;
    let pdf: Vec<(f64, f64)> = (1..400)
        .map(|k| {
            let x = k as f64 / 400.0;
            Ok((x, law.pdf(x)?))
        })
        .collect::<Result<_>>()?;
    out.csv("fig1_pdf.csv", &["x", "pdf"], pdf.iter().map(|&(x, y)| vec![num(x), num(y)]))?;
    let name = Statistic::CrbRatio { index: 0 }.name();
    let h = &summary.histograms[&name];
    let mut plot = Plot::new(
        &format!("CRB ratio before/after compression, n = {}, m = {}", c.n, c.m),
        "(J⁻¹)₁₁ / (Ĵ⁻¹)₁₁",
        "density",
    );
    plot.bars(
        h.edges.windows(2).zip(h.densities()).map(|(e, d)| (e[0], e[1], d)).collect(),
        PALETTE[0],
        Some("Monte Carlo"),
    );
    let (lo, hi) = (h.edges[0], h.edges[h.edges.len() - 1]);
    let width = hi - lo;
    plot.line(
        pdf.into_iter().filter(|&(x, _)| x >= lo - 0.1 * width && x <= hi + 0.1 * width).collect(),
        PALETTE[1],
        2.0,
        Some(&format!("Beta({}, {})", law.a(), law.b())),
    );
    out.text("fig1.svg", &plot.render())?;

    // Concentration ellipses.
    let ell = EllipseConfig {
        model: c.scenario(),
        compressor: c.compressor(),
        sigma2: 1.0,
        curves: c.curves,
        points: c.points,
        r2: None,
    };
    write_ellipses(out, "fig2_ellipses", &ell)?;

    // Design curves.
    let rows = planner::curve(c.n, 2, &c.kappas, &c.confidences)?;
    write_curve(out, "fig3_curves.csv", &rows)?;
    let mut plot = Plot::new(&format!("Measurements needed for CRB inflation at most κ, n = {}", c.n), "κ", "m / n")
        .y_range(0.0, 1.0);
    for (k, &conf) in c.confidences.iter().enumerate() {
        let pts = rows
            .iter()
            .filter(|r| r.confidence == conf)
            .filter_map(|r| r.ratio.map(|q| (r.kappa, q)))
            .collect();
        plot.line(pts, PALETTE[k % PALETTE.len()], 2.0, Some(&format!("confidence {conf}")));
    }
    out.text("fig3.svg", &plot.render())
}
