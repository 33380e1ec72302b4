mod args;
mod jobs;
mod output;
mod svg;

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::error::ErrorKind;
use clap::Parser;
use crb_compress::betalaw::{self, BetaLaw, MatrixBetaLaw};
use crb_compress::planner::{self, CurveRow, PlanQuery};
use serde::{Deserialize, Serialize};

use args::{Cli, Command, DistArgs, Eval, Law};
use jobs::Job;
use output::{csv_string, num, OutputDir};

const MANIFEST: &str = "manifest.json";

/// Written next to every output set; enough to regenerate it.
#[derive(Debug, Serialize, Deserialize)]
struct RunManifest {
    #[serde(flatten)]
    job: Job,
    seed: Option<u64>,
    version: String,
    outputs: Vec<String>,
    duration_seconds: f64,
}

/// Executes `job` into `dir` and writes its manifest.
fn run_job(job: Job, dir: &Path, threads: Option<usize>) -> Result<OutputDir> {
    let start = Instant::now();
    let mut out = OutputDir::create(dir)?;
    job.execute(&mut out, threads)?;
    let manifest = RunManifest {
        seed: job.seed(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        outputs: out.written().to_vec(),
        duration_seconds: start.elapsed().as_secs_f64(),
        job,
    };
    out.json(MANIFEST, &manifest)?;
    report(manifest.job.name(), &out);
    Ok(out)
}

fn report(job: &str, out: &OutputDir) {
    eprintln!("{job}: wrote {} files to {}", out.written().len(), out.root().display());
}

fn dist(a: &DistArgs) -> Result<Vec<f64>> {
    let need = |v: Option<usize>, name: &str| v.with_context(|| format!("--{name} is required for this law"));
    if a.law == Law::WEigenvalues {
        let law = MatrixBetaLaw::new(a.at.len(), need(a.m, "m")?, need(a.n, "n")?)?;
        let l = betalaw::eig_joint_logpdf(&a.at, &law)?;
        return match a.eval {
            Eval::Logpdf => Ok(vec![l]),
            Eval::Pdf => Ok(vec![l.exp()]),
            _ => bail!("the eigenvalue law supports only pdf and logpdf"),
        };
    }
    let (law, reciprocal) = match a.law {
        Law::CrbRatio => (betalaw::crb_ratio_law(need(a.n, "n")?, need(a.m, "m")?, need(a.p, "p")?)?, false),
        Law::CrbInflation => (betalaw::crb_ratio_law(need(a.n, "n")?, need(a.m, "m")?, need(a.p, "p")?)?, true),
        Law::KlRatio => (betalaw::kl_ratio_law(need(a.n, "n")?, need(a.m, "m")?)?, false),
        Law::Beta => {
            let (Some(x), Some(y)) = (a.a, a.b) else { bail!("--a and --b are required for the beta law") };
            (BetaLaw::new(x, y)?, false)
        }
        Law::WEigenvalues => unreachable!(),
    };
    match a.eval {
        Eval::Mean => return Ok(vec![if reciprocal { law.mean_reciprocal()? } else { law.mean() }]),
        Eval::Variance => return Ok(vec![if reciprocal { law.variance_reciprocal()? } else { law.variance() }]),
        _ => {}
    }
    if a.at.is_empty() {
        bail!("--at is required for {:?}", a.eval);
    }
    a.at.iter()
        .map(|&t| {
            let v = if !reciprocal {
                match a.eval {
                    Eval::Pdf => law.pdf(t)?,
                    Eval::Logpdf => law.ln_pdf(t)?,
                    Eval::Cdf => law.cdf(t)?,
                    Eval::Sf => law.sf(t)?,
                    Eval::Quantile => law.quantile(t)?,
                    Eval::Mean | Eval::Variance => unreachable!(),
                }
            } else {
                // T = 1/X on (1, ∞).
                let x = if t > 0.0 { 1.0 / t } else { f64::INFINITY };
                let inside = t > 1.0;
                match a.eval {
                    Eval::Pdf => if inside { law.pdf(x)? * x * x } else { 0.0 },
                    Eval::Logpdf => if inside { law.ln_pdf(x)? + 2.0 * x.ln() } else { f64::NEG_INFINITY },
                    Eval::Cdf => if inside { law.sf(x)? } else { 0.0 },
                    Eval::Sf => if inside { law.cdf(x)? } else { 1.0 },
                    Eval::Quantile => 1.0 / law.quantile(1.0 - t)?,
                    Eval::Mean | Eval::Variance => unreachable!(),
                }
            };
            Ok(v)
        })
        .collect()
}

fn plan(a: &args::PlanArgs, threads: Option<usize>) -> Result<()> {
    // A single (κ, confidence) pair is a query: infeasibility is an error.
    if let ([kappa], [confidence]) = (a.kappa.as_slice(), a.confidence.as_slice()) {
        let q = PlanQuery { n: a.n, p: a.p, kappa: *kappa, confidence: *confidence };
        let plan = planner::min_measurements(&q)?;
        let row = CurveRow { kappa: *kappa, confidence: *confidence, m: Some(plan.m), ratio: Some(plan.ratio) };
        print!("{}", csv_string(&["kappa", "confidence", "m", "ratio"], [jobs::curve_record(&row)])?);
        eprintln!("achieved confidence {}", num(plan.confidence));
    } else {
        let job = args::plan_job(a);
        let Job::Plan(c) = &job else { unreachable!() };
        let rows = planner::curve(c.n, c.p, &c.kappas, &c.confidences)?;
        print!("{}", csv_string(&["kappa", "confidence", "m", "ratio"], rows.iter().map(jobs::curve_record))?);
    }
    if let Some(dir) = &a.out_dir {
        run_job(args::plan_job(a), dir, threads)?;
    }
    Ok(())
}

fn replay(manifest: &Path, out_dir: Option<&PathBuf>, threads: Option<usize>) -> Result<()> {
    let text = std::fs::read_to_string(manifest).with_context(|| format!("cannot read {}", manifest.display()))?;
    let m: RunManifest = serde_json::from_str(&text).with_context(|| format!("invalid manifest {}", manifest.display()))?;
    let dir = match out_dir {
        Some(d) => d.clone(),
        None => manifest.parent().map(Path::to_path_buf).unwrap_or_default(),
    };
    run_job(m.job, &dir, threads)?;
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    let threads = cli.threads;
    match &cli.command {
        Command::Fisher(a) => {
            let job = args::fisher_job(a)?;
            let Job::Fisher(c) = &job else { unreachable!() };
            println!("{}", serde_json::to_string_pretty(&jobs::fisher_report(c)?)?);
            if let Some(dir) = &a.out_dir {
                run_job(job, dir, threads)?;
            }
        }
        Command::Simulate(a) => {
            let job = args::simulate_job(a)?;
            let out = run_job(job, &a.out_dir, threads)?;
            let summary: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(out.root().join("summary.json"))?)?;
            println!("{}", serde_json::to_string_pretty(&summary["statistics"])?);
        }
        Command::Dist(a) => {
            for v in dist(a)? {
                println!("{}", num(v));
            }
        }
        Command::Plan(a) => plan(a, threads)?,
        Command::Ellipse(a) => {
            run_job(args::ellipse_job(a)?, &a.out_dir, threads)?;
        }
        Command::Figures(a) => {
            run_job(args::figures_job(a)?, &a.out_dir, threads)?;
        }
        Command::Replay(a) => replay(&a.manifest, a.out_dir.as_ref(), threads)?,
    }
    Ok(())
}

/// 1 for usage and configuration problems, 2 for numerical failures.
fn exit_code(err: &anyhow::Error) -> u8 {
    use crb_compress::Error as E;
    match err.downcast_ref::<E>() {
        Some(E::BadShape(_) | E::BadSpec(_) | E::DomainError(_)) | None => 1,
        Some(_) => 2,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            let code = exit_code(&err);
            if code == 2 {
                let kind = err.downcast_ref::<crb_compress::Error>().map_or("Error", |e| e.kind());
                eprintln!("{}", serde_json::json!({ "error": kind, "message": format!("{err:#}") }));
            } else {
                eprintln!("error: {err:#}");
            }
            ExitCode::from(code)
        }
    }
}
