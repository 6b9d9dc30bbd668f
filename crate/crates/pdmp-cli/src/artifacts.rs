//! Plot-ready CSV and JSON artifacts. Every file starts with a column
//! header; floats are written with the shortest round-trip formatting, so
//! reruns of the same config are byte-identical.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::Serialize;

use pdmp::models::CrackParams;
use pdmp::{
    batch_eval, CvReport, Estimates, Kernel, KernelShape, PdmpError, PdmpModel, PipelineReport,
    QueryPoint, Result, Selection,
};
use pdmp::{BacteriaTargetReport, BandwidthSchedule, CrackTargetReport, EmbeddedChain};

pub fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)?;
    }
    Ok(BufWriter::new(File::create(path)?))
}

/// One full-run replicate row.
#[derive(Clone, Debug, Serialize)]
pub struct ReplicateRow {
    pub replicate: usize,
    pub seed: u64,
    pub report: PipelineReport,
}

/// `lambda_replicates.csv`: the jump-rate estimate of every replicate with
/// the exponents and the selected node.
pub fn write_lambda_replicates(path: &Path, rows: &[ReplicateRow]) -> Result<()> {
    let mut w = create(path)?;
    let d = rows.first().map_or(0, |r| r.report.target.len());
    write!(w, "replicate,seed,lambda,sigma2,clt_scale,alpha_g,alpha_f,beta_f")?;
    for j in 1..=d {
        write!(w, ",xi_{j}")?;
    }
    writeln!(w, ",tau,kappa,feasible")?;
    for row in rows {
        let est = &row.report.estimate;
        let best = row.report.selection.best_node();
        write!(
            w,
            "{},{},{},{},{},{},{},{}",
            row.replicate,
            row.seed,
            est.lambda.value(),
            est.sigma2.map_or(f64::NAN, |s| s),
            est.clt_scale,
            row.report.alpha_g,
            row.report.alpha_f,
            row.report.beta_f
        )?;
        for &c in &best.xi {
            write!(w, ",{c}")?;
        }
        writeln!(
            w,
            ",{},{},{}",
            best.tau, best.kappa, row.report.selection.feasibility.feasible
        )?;
    }
    w.flush()?;
    Ok(())
}

/// `kappa_curve.csv`: the selection criterion along the curve.
pub fn write_kappa_curve(path: &Path, selection: &Selection) -> Result<()> {
    let mut w = create(path)?;
    let d = selection.nodes.first().map_or(0, |n| n.xi.len());
    write!(w, "j,tau")?;
    for j in 1..=d {
        write!(w, ",xi_{j}")?;
    }
    writeln!(w, ",kappa,nu,selected")?;
    for (j, node) in selection.nodes.iter().enumerate() {
        write!(w, "{j},{}", node.tau)?;
        for &c in &node.xi {
            write!(w, ",{c}")?;
        }
        writeln!(w, ",{},{},{}", node.kappa, node.nu, j == selection.best)?;
    }
    w.flush()?;
    Ok(())
}

/// `cv_g_errors.csv`: survival-criterion error per spatial exponent.
pub fn write_cv_g_errors(path: &Path, report: &CvReport) -> Result<()> {
    let mut w = create(path)?;
    writeln!(w, "alpha,error,rho")?;
    for (a, e) in report.alphas.iter().zip(&report.errors) {
        writeln!(w, "{a},{e},{}", report.rho)?;
    }
    w.flush()?;
    Ok(())
}

/// `cv_f_errors.csv`: density-criterion error over the exponent grid
/// (row-major in alpha, then beta).
pub fn write_cv_f_errors(path: &Path, report: &CvReport) -> Result<()> {
    let betas = report.betas.as_deref().ok_or_else(|| PdmpError::Config {
        context: "survival report passed where a density report was expected".into(),
    })?;
    let mut w = create(path)?;
    writeln!(w, "alpha,beta,error")?;
    for (i, a) in report.alphas.iter().enumerate() {
        for (j, b) in betas.iter().enumerate() {
            writeln!(w, "{a},{b},{}", report.errors[i * betas.len() + j])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// `nu_grid.csv`: the spatial density estimate over a regular grid, for
/// models of dimension one or two.
pub fn write_nu_grid(
    path: &Path,
    model: &dyn PdmpModel,
    chain: &EmbeddedChain,
    schedule: BandwidthSchedule,
    shape: KernelShape,
    per_axis: usize,
) -> Result<()> {
    let d = model.dim();
    assert!(d <= 2, "density grids are for one- or two-dimensional models");
    let axis: Vec<f64> = (0..per_axis)
        .map(|i| (i as f64 + 0.5) / per_axis as f64)
        .collect();
    let mut queries = Vec::new();
    if d == 1 {
        for &x in &axis {
            queries.push(QueryPoint::new(vec![x], 0.0));
        }
    } else {
        for &x in &axis {
            for &y in &axis {
                queries.push(QueryPoint::new(vec![x, y], 0.0));
            }
        }
    }
    let estimates: Vec<Estimates> = batch_eval(
        chain,
        &Kernel::new(shape, d),
        &Kernel::new(shape, 1),
        schedule,
        &queries,
    )?;
    let mut w = create(path)?;
    if d == 1 {
        writeln!(w, "x_1,nu")?;
    } else {
        writeln!(w, "x_1,x_2,nu")?;
    }
    for (q, e) in queries.iter().zip(&estimates) {
        for &c in &q.x {
            write!(w, "{c},")?;
        }
        writeln!(w, "{}", e.nu_hat)?;
    }
    w.flush()?;
    Ok(())
}

/// `bacteria_estimates.csv` and `bacteria_aggregates.csv`.
pub fn write_bacteria_csvs(dir: &Path, targets: &[BacteriaTargetReport]) -> Result<()> {
    let mut w = create(&dir.join("bacteria_estimates.csv"))?;
    writeln!(w, "x_1,x_2,angle,lambda")?;
    for t in targets {
        for (a, l) in t.angles.iter().zip(&t.lambdas) {
            writeln!(w, "{},{},{a},{l}", t.target[0], t.target[1])?;
        }
    }
    w.flush()?;
    let mut w = create(&dir.join("bacteria_aggregates.csv"))?;
    writeln!(w, "x_1,x_2,lambda")?;
    for t in targets {
        writeln!(w, "{},{},{}", t.target[0], t.target[1], t.aggregate)?;
    }
    w.flush()?;
    Ok(())
}

/// `crack_criterion.csv` (the criterion along each parameter curve) and
/// `crack_lambda.csv` (the switch-rate estimate per target length).
pub fn write_crack_csvs(dir: &Path, targets: &[CrackTargetReport]) -> Result<()> {
    let mut w = create(&dir.join("crack_criterion.csv"))?;
    writeln!(w, "a_target_mm,j,tau,m,kappa,nu,selected")?;
    for t in targets {
        for (j, node) in t.selection.nodes.iter().enumerate() {
            writeln!(
                w,
                "{},{j},{},{},{},{},{}",
                t.a_target_mm,
                node.tau,
                node.xi[0],
                node.kappa,
                node.nu,
                j == t.selection.best
            )?;
        }
    }
    w.flush()?;
    let mut w = create(&dir.join("crack_lambda.csv"))?;
    writeln!(w, "a_target_mm,m_star,tau_star,lambda,sigma2")?;
    for t in targets {
        writeln!(
            w,
            "{},{},{},{},{}",
            t.a_target_mm,
            t.m_star,
            t.tau_star,
            t.estimate.lambda.value(),
            t.estimate.sigma2.map_or(f64::NAN, |s| s)
        )?;
    }
    w.flush()?;
    Ok(())
}

/// The top-level report written by `full-run`, one shape per scenario.
/// `timestamp` is the only field reruns are allowed to differ in.
#[derive(Serialize)]
pub struct FullRunReport<'a, C: Serialize> {
    pub timestamp: u64,
    pub model: &'a str,
    pub config: &'a C,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub replicates: Option<&'a [ReplicateRow]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bacteria_targets: Option<&'a [BacteriaTargetReport]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub crack_targets: Option<&'a [CrackTargetReport]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub crack_params: Option<&'a CrackParams>,
    pub summary: ReportSummary,
}

/// Order statistics of the finite jump-rate estimates.
#[derive(Clone, Debug, Default, Serialize)]
pub struct ReportSummary {
    pub n_estimates: usize,
    pub n_finite: usize,
    pub lambda_median: f64,
    pub lambda_q1: f64,
    pub lambda_q3: f64,
}

pub fn summarize_lambdas(lambdas: &[f64]) -> ReportSummary {
    let finite: Vec<f64> = lambdas.iter().copied().filter(|l| l.is_finite()).collect();
    if finite.is_empty() {
        return ReportSummary {
            n_estimates: lambdas.len(),
            n_finite: 0,
            lambda_median: f64::NAN,
            lambda_q1: f64::NAN,
            lambda_q3: f64::NAN,
        };
    }
    ReportSummary {
        n_estimates: lambdas.len(),
        n_finite: finite.len(),
        lambda_median: pdmp::diagnostics::quantile(&finite, 0.5),
        lambda_q1: pdmp::diagnostics::quantile(&finite, 0.25),
        lambda_q3: pdmp::diagnostics::quantile(&finite, 0.75),
    }
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value).map_err(|e| PdmpError::Config {
        context: format!("cannot serialize {}: {e}", path.display()),
    })?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}
