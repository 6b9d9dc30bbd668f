//! Command-line driver: simulation, bandwidth cross-validation, window-size
//! selection and jump-rate estimation for the bundled process models, plus
//! plot-ready CSV artifacts. One JSON config drives every subcommand; reruns
//! of the same config reproduce every output byte for byte, except for the
//! timestamp of `report.json`.

mod artifacts;
mod config;

use std::io::Write;
use std::path::PathBuf;
use std::process;
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Parser, Subcommand};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::Value;

use config::{load_config, ModelConfig, RunConfig};
use pdmp::models::{
    build_crack_parameter_space, generate_crack_histories, ingest_crack_histories,
    parameter_curve, switches_to_chain, CrackData, SwitchRecord,
};
use pdmp::{
    bacteria_scenario, batch_eval, build_tube, choose_alpha_beta_f, choose_alpha_g,
    crack_scenario, default_curve_step, prepare_crossings, reverse_curve, run_target_pipeline,
    select_xi_star, simulate_chain, simulate_main_val, BandwidthSchedule, EmbeddedChain,
    JumpMethod, Kernel, KernelShape, PdmpError, PdmpModel, QueryPoint, Ratio, Result,
    SeedSequence, SelectorOptions, ValidationPlan,
};

use artifacts::{FullRunReport, ReplicateRow};

#[derive(Parser)]
#[command(
    name = "pdmp-cli",
    version,
    about = "Nonparametric jump-rate estimation for piecewise-deterministic processes"
)]
struct Cli {
    /// JSON run configuration; see `print-config` for the schema.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Master seed, overriding the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for replicate studies.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Output directory, overriding the config.
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Simulate the embedded chain and write it as CSV.
    Simulate,
    /// Evaluate the estimators at fixed query points.
    Estimate,
    /// Cross-validate the survival-criterion exponent.
    CvG,
    /// Cross-validate the density exponents.
    CvF,
    /// Rank the curve through the target by the selection criterion.
    Select,
    /// Simulate, cross-validate, select and estimate in one pass.
    FullRun,
    /// Summarize full-run reports.
    Report {
        /// One or more report.json files.
        #[arg(required = true)]
        paths: Vec<PathBuf>,
    },
    /// Print the filled-in default configuration of a model.
    PrintConfig {
        /// One of tcp, bacteria, oracle, crack (default tcp).
        model: Option<String>,
    },
}

fn main() {
    let cli = Cli::parse();
    if let Some(jobs) = cli.jobs {
        rayon::ThreadPoolBuilder::new().num_threads(jobs).build_global().ok();
    }
    if let Err(e) = run(&cli) {
        eprintln!("error: {e}");
        process::exit(exit_code(&e));
    }
}

/// 0 ok, 2 config or input, 3 simulation or numerics, 4 estimation
/// impossible on this data.
fn exit_code(e: &PdmpError) -> i32 {
    use PdmpError::*;
    match e {
        Config { .. } | Parse { .. } | Io(_) | DimensionMismatch { .. }
        | OutsideDomain { .. } => 2,
        SelectionImpossible | EstimationImpossible { .. } | EmptyGrid { .. } => 4,
        _ => 3,
    }
}

fn run(cli: &Cli) -> Result<()> {
    match &cli.cmd {
        Cmd::Report { paths } => return cmd_report(paths),
        Cmd::PrintConfig { model } => return cmd_print_config(model.as_deref()),
        _ => {}
    }
    let path = cli.config.as_ref().ok_or_else(|| PdmpError::Config {
        context: "this command needs --config <path>".into(),
    })?;
    let cfg = load_config(path, cli.seed, cli.out.clone())?;
    match &cli.cmd {
        Cmd::Simulate => cmd_simulate(&cfg),
        Cmd::Estimate => cmd_estimate(&cfg),
        Cmd::CvG => cmd_cv_g(&cfg),
        Cmd::CvF => cmd_cv_f(&cfg),
        Cmd::Select => cmd_select(&cfg),
        Cmd::FullRun => cmd_full_run(&cfg),
        Cmd::Report { .. } | Cmd::PrintConfig { .. } => unreachable!(),
    }
}

fn model_name(m: &ModelConfig) -> &'static str {
    match m {
        ModelConfig::Tcp => "tcp",
        ModelConfig::Bacteria { .. } => "bacteria",
        ModelConfig::Oracle { .. } => "oracle",
        ModelConfig::Crack { .. } => "crack",
    }
}

/// Replicate seeds stride through the sequence space so that replicate 0
/// reproduces the single-run seed exactly.
fn derive_seed(master: u64, replicate: usize) -> u64 {
    master.wrapping_add((replicate as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

fn timestamp() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs())
}

/// Switch records of the crack model: read from the configured file, or
/// drawn synthetically on their own seed stream.
fn crack_records(cfg: &RunConfig) -> Result<Vec<SwitchRecord>> {
    let ModelConfig::Crack { params, histories, count, .. } = &cfg.model else {
        return Err(PdmpError::Config { context: "not a crack configuration".into() });
    };
    match histories {
        Some(path) => {
            let mut file = std::fs::File::open(path).map_err(|e| PdmpError::Config {
                context: format!("cannot read histories {}: {e}", path.display()),
            })?;
            match ingest_crack_histories(&mut file)? {
                CrackData::Switches(records) => Ok(records),
                CrackData::Curves(_) => Err(PdmpError::Config {
                    context: "growth curves carry no switch labels; estimation needs the \
                              switch-record schema (history_id,m,a_switch_mm)"
                        .into(),
                }),
            }
        }
        None => {
            let mut rng = SeedSequence::new(cfg.seed).stream(7);
            generate_crack_histories(params, *count, &mut rng)
        }
    }
}

/// The main estimation chain: simulated for flow models, derived from
/// switch records for the crack model.
fn main_chain(cfg: &RunConfig) -> Result<EmbeddedChain> {
    if let ModelConfig::Crack { params, .. } = &cfg.model {
        let records = crack_records(cfg)?;
        return switches_to_chain(params, &records);
    }
    let model = cfg.model.build()?;
    let s = cfg.pipeline_settings();
    let x0 = cfg.start_state(model.as_ref())?;
    let mut rng = SeedSequence::new(cfg.seed).stream(0);
    simulate_chain(model.as_ref(), &s.solver, JumpMethod::Auto, &x0, cfg.n, &mut rng)
}

fn cmd_simulate(cfg: &RunConfig) -> Result<()> {
    let dir = &cfg.output_dir;
    std::fs::create_dir_all(dir)?;
    if let ModelConfig::Crack { params, .. } = &cfg.model {
        let records = crack_records(cfg)?;
        let mut w = artifacts::create(&dir.join("switch_records.csv"))?;
        writeln!(w, "history_id,m,a_switch_mm")?;
        for r in &records {
            writeln!(w, "{},{},{}", r.history_id, r.m, r.a_switch_mm)?;
        }
        w.flush()?;
        let chain = switches_to_chain(params, &records)?;
        chain.to_csv_file(&dir.join("chain.csv"))?;
        write_meta(cfg, &chain)?;
        println!(
            "wrote {} switch records and their chain to {}",
            records.len(),
            dir.display()
        );
        return Ok(());
    }
    let chain = main_chain(cfg)?;
    chain.to_csv_file(&dir.join("chain.csv"))?;
    write_meta(cfg, &chain)?;
    println!("wrote {} records to {}", chain.len(), dir.join("chain.csv").display());
    Ok(())
}

fn write_meta(cfg: &RunConfig, chain: &EmbeddedChain) -> Result<()> {
    #[derive(Serialize)]
    struct Meta<'a> {
        model: &'a str,
        seed: u64,
        n: usize,
        dim: usize,
        boundary_fraction: f64,
    }
    artifacts::write_json(
        &cfg.output_dir.join("meta.json"),
        &Meta {
            model: model_name(&cfg.model),
            seed: cfg.seed,
            n: chain.len(),
            dim: chain.dim(),
            boundary_fraction: chain.boundary_fraction(),
        },
    )
}

fn cmd_estimate(cfg: &RunConfig) -> Result<()> {
    let chain = main_chain(cfg)?;
    let dim = chain.dim();
    let queries: Vec<QueryPoint> = if cfg.queries.is_empty() {
        let x = if cfg.target_x.is_empty() {
            cfg.model.default_target()
        } else {
            cfg.target_x.clone()
        };
        if x.is_empty() {
            return Err(PdmpError::Config {
                context: "estimate needs queries or a target_x".into(),
            });
        }
        vec![QueryPoint::new(x, 0.0)]
    } else {
        cfg.queries.iter().map(|q| QueryPoint::new(q.x.clone(), q.t)).collect()
    };
    for q in &queries {
        if q.x.len() != dim {
            return Err(PdmpError::DimensionMismatch { expected: dim, got: q.x.len() });
        }
    }
    let fixed = cfg.fixed_or_default();
    let ks = Kernel::new(KernelShape::Epanechnikov, dim);
    let kt = Kernel::new(KernelShape::Epanechnikov, 1);
    let schedule_f = BandwidthSchedule::new(cfg.v0, fixed.alpha_f, cfg.w0, fixed.beta_f);
    let schedule_g = BandwidthSchedule::new(cfg.v0, fixed.alpha_g, cfg.w0, 0.5);
    let with_f = batch_eval(&chain, &ks, &kt, schedule_f, &queries)?;
    let with_g = batch_eval(&chain, &ks, &kt, schedule_g, &queries)?;

    let path = cfg.output_dir.join("estimates.csv");
    let mut w = artifacts::create(&path)?;
    for j in 1..=dim {
        write!(w, "x_{j},")?;
    }
    writeln!(w, "t,f_hat,g_hat,nu_hat,lambda")?;
    for (q, (f, g)) in queries.iter().zip(with_f.iter().zip(&with_g)) {
        for &c in &q.x {
            write!(w, "{c},")?;
        }
        let lambda = Ratio::of(f.f_hat, g.g_hat);
        writeln!(w, "{},{},{},{},{}", q.t, f.f_hat, g.g_hat, f.nu_hat, lambda.value())?;
    }
    w.flush()?;
    println!("wrote {} estimates to {}", queries.len(), path.display());
    Ok(())
}

/// Chains and reverse curve shared by the cross-validation commands.
#[allow(clippy::type_complexity)]
fn flow_cv_setup(
    cfg: &RunConfig,
) -> Result<(Box<dyn PdmpModel>, EmbeddedChain, EmbeddedChain, pdmp::ReverseCurve, pdmp::PipelineSettings)>
{
    if cfg.model.is_crack() {
        return Err(PdmpError::Config {
            context: "the crack records live on a frozen parameter space with no flow tube; \
                      fix the bandwidths instead of cross-validating"
                .into(),
        });
    }
    let model = cfg.model.build()?;
    let s = cfg.pipeline_settings();
    let x0 = cfg.start_state(model.as_ref())?;
    let (main, val) = simulate_main_val(
        model.as_ref(),
        &s.solver,
        JumpMethod::Auto,
        &x0,
        cfg.n,
        cfg.n_val,
        cfg.seed,
    )?;
    let target = cfg.target(model.as_ref())?;
    let step = if s.curve_step > 0.0 {
        s.curve_step
    } else {
        default_curve_step(model.as_ref(), &s.solver, &target, s.curve_cap, s.min_curve_nodes)?
    };
    let curve = reverse_curve(model.as_ref(), &s.solver, &target, step, s.curve_cap)?;
    Ok((model, main, val, curve, s))
}

fn cmd_cv_g(cfg: &RunConfig) -> Result<()> {
    let (model, main, val, curve, s) = flow_cv_setup(cfg)?;
    let tube = build_tube(model.as_ref(), &s.solver, &curve, s.rho)?;
    let crossings =
        prepare_crossings(model.as_ref(), &s.solver, &tube, &val, 2.0 * curve.horizon)?;
    let ks = Kernel::new(s.shape, model.dim());
    let kt = Kernel::new(s.shape, 1);
    let report = choose_alpha_g(
        &main, &curve, &crossings, val.len(), &ks, &kt, s.v0, s.w0, &s.alpha_grid, s.rho,
    )?;
    let dir = &cfg.output_dir;
    artifacts::write_cv_g_errors(&dir.join("cv_g_errors.csv"), &report)?;
    artifacts::write_json(&dir.join("cv_g.json"), &report)?;
    println!(
        "alpha_g = {} from {} validation crossings; wrote {}",
        report.chosen_alpha,
        report.hit_count,
        dir.join("cv_g_errors.csv").display()
    );
    Ok(())
}

fn cmd_cv_f(cfg: &RunConfig) -> Result<()> {
    let (model, main, val, curve, s) = flow_cv_setup(cfg)?;
    // The crossing scan does not depend on the radius, so the survival tube
    // serves here as well.
    let tube = build_tube(model.as_ref(), &s.solver, &curve, s.rho)?;
    let crossings =
        prepare_crossings(model.as_ref(), &s.solver, &tube, &val, 2.0 * curve.horizon)?;
    let ks = Kernel::new(s.shape, model.dim());
    let kt = Kernel::new(s.shape, 1);
    let report = choose_alpha_beta_f(
        &main,
        &curve,
        &crossings,
        val.len(),
        &ks,
        &kt,
        s.v0,
        s.w0,
        &s.alpha_grid,
        &s.beta_grid,
        s.rho2,
        s.rho2,
    )?;
    let dir = &cfg.output_dir;
    artifacts::write_cv_f_errors(&dir.join("cv_f_errors.csv"), &report)?;
    artifacts::write_json(&dir.join("cv_f.json"), &report)?;
    println!(
        "alpha_f = {}, beta_f = {} from {} validation crossings; wrote {}",
        report.chosen_alpha,
        report.chosen_beta.expect("density search returns a beta"),
        report.hit_count,
        dir.join("cv_f_errors.csv").display()
    );
    Ok(())
}

fn cmd_select(cfg: &RunConfig) -> Result<()> {
    let dir = &cfg.output_dir;
    let s = cfg.pipeline_settings();
    let fixed = cfg.fixed_or_default();
    let kt = Kernel::new(s.shape, 1);
    let schedule_g = BandwidthSchedule::new(s.v0, fixed.alpha_g, s.w0, 0.5);
    let options = SelectorOptions { strict_feasibility: s.strict_feasibility };
    let selection = if let ModelConfig::Crack { params, targets, .. } = &cfg.model {
        let records = crack_records(cfg)?;
        let chain = switches_to_chain(params, &records)?;
        let nodes = parameter_curve(params, targets[0], &cfg.model.crack_m_grid())?;
        let space = build_crack_parameter_space(*params);
        let ks = Kernel::new(s.shape, 1);
        select_xi_star(&space, &s.solver, &chain, &ks, &kt, schedule_g, &nodes, options)?
    } else {
        let model = cfg.model.build()?;
        let chain = main_chain(cfg)?;
        let target = cfg.target(model.as_ref())?;
        let step = if s.curve_step > 0.0 {
            s.curve_step
        } else {
            default_curve_step(model.as_ref(), &s.solver, &target, s.curve_cap, s.min_curve_nodes)?
        };
        let curve = reverse_curve(model.as_ref(), &s.solver, &target, step, s.curve_cap)?;
        let ks = Kernel::new(s.shape, model.dim());
        select_xi_star(model.as_ref(), &s.solver, &chain, &ks, &kt, schedule_g, &curve.nodes, options)?
    };
    artifacts::write_kappa_curve(&dir.join("kappa_curve.csv"), &selection)?;
    artifacts::write_json(&dir.join("selection.json"), &selection)?;
    let best = selection.best_node();
    println!(
        "selected node {} of {}: tau = {}, xi = {:?}, kappa = {}",
        selection.best,
        selection.nodes.len(),
        best.tau,
        best.xi,
        best.kappa
    );
    Ok(())
}

fn cmd_full_run(cfg: &RunConfig) -> Result<()> {
    let dir = &cfg.output_dir;
    match &cfg.model {
        ModelConfig::Crack { params, targets, .. } => {
            let records = crack_records(cfg)?;
            let m_grid = cfg.model.crack_m_grid();
            let mut s = cfg.pipeline_settings();
            s.fixed = Some(cfg.fixed_or_default());
            let reports = crack_scenario(params, &records, targets, &m_grid, &s)?;
            artifacts::write_crack_csvs(dir, &reports)?;
            let lambdas: Vec<f64> =
                reports.iter().map(|t| t.estimate.lambda.value()).collect();
            let summary = artifacts::summarize_lambdas(&lambdas);
            artifacts::write_json(
                &dir.join("report.json"),
                &FullRunReport {
                    timestamp: timestamp(),
                    model: "crack",
                    config: cfg,
                    replicates: None,
                    bacteria_targets: None,
                    crack_targets: Some(&reports),
                    crack_params: Some(params),
                    summary,
                },
            )?;
            for t in &reports {
                println!(
                    "a = {} mm: m* = {:.3}, tau* = {:.4}, lambda = {:.4}",
                    t.a_target_mm,
                    t.m_star,
                    t.tau_star,
                    t.estimate.lambda.value()
                );
            }
            println!("wrote report to {}", dir.join("report.json").display());
            Ok(())
        }
        ModelConfig::Bacteria { .. } => {
            let mut s = cfg.pipeline_settings();
            s.fixed = Some(cfg.fixed_or_default());
            let reports = bacteria_scenario(&s, cfg.n, cfg.seed)?;
            artifacts::write_bacteria_csvs(dir, &reports)?;
            let aggregates: Vec<f64> = reports.iter().map(|t| t.aggregate).collect();
            let summary = artifacts::summarize_lambdas(&aggregates);
            artifacts::write_json(
                &dir.join("report.json"),
                &FullRunReport {
                    timestamp: timestamp(),
                    model: "bacteria",
                    config: cfg,
                    replicates: None,
                    bacteria_targets: Some(&reports),
                    crack_targets: None,
                    crack_params: None,
                    summary,
                },
            )?;
            for t in &reports {
                println!(
                    "target ({:.2}, {:.2}): aggregated lambda = {:.4}",
                    t.target[0], t.target[1], t.aggregate
                );
            }
            println!("wrote report to {}", dir.join("report.json").display());
            Ok(())
        }
        _ => cmd_full_run_flow(cfg),
    }
}

/// Replicated full pipeline for the models with a simulatable flow.
fn cmd_full_run_flow(cfg: &RunConfig) -> Result<()> {
    let dir = &cfg.output_dir;
    let probe = cfg.model.build()?;
    let s = cfg.pipeline_settings();
    let x0 = cfg.start_state(probe.as_ref())?;
    let target = cfg.target(probe.as_ref())?;

    let seeds: Vec<u64> = (0..cfg.replicates).map(|r| derive_seed(cfg.seed, r)).collect();
    let rows: Vec<ReplicateRow> = seeds
        .par_iter()
        .enumerate()
        .map(|(r, &seed)| -> Result<ReplicateRow> {
            // Each worker builds its own model; the trait object is stateless
            // but not shared across threads.
            let model = cfg.model.build()?;
            let (main, val) = simulate_main_val(
                model.as_ref(),
                &s.solver,
                JumpMethod::Auto,
                &x0,
                cfg.n,
                cfg.n_val,
                seed,
            )?;
            let report =
                run_target_pipeline(model.as_ref(), &s, &main, ValidationPlan::Chain(&val), &target)?;
            Ok(ReplicateRow { replicate: r, seed, report })
        })
        .collect::<Result<Vec<_>>>()?;

    artifacts::write_lambda_replicates(&dir.join("lambda_replicates.csv"), &rows)?;
    let first = &rows[0].report;
    artifacts::write_kappa_curve(&dir.join("kappa_curve.csv"), &first.selection)?;
    if let Some(cv) = &first.cv_g {
        artifacts::write_cv_g_errors(&dir.join("cv_g_errors.csv"), cv)?;
    }
    if let Some(cv) = &first.cv_f {
        artifacts::write_cv_f_errors(&dir.join("cv_f_errors.csv"), cv)?;
    }
    if probe.dim() <= 2 {
        // The density heat map reuses the first replicate's chain.
        let (main, _) = simulate_main_val(
            probe.as_ref(),
            &s.solver,
            JumpMethod::Auto,
            &x0,
            cfg.n,
            cfg.n_val,
            seeds[0],
        )?;
        let schedule_f = BandwidthSchedule::new(s.v0, first.alpha_f, s.w0, first.beta_f);
        artifacts::write_nu_grid(
            &dir.join("nu_grid.csv"),
            probe.as_ref(),
            &main,
            schedule_f,
            s.shape,
            25,
        )?;
    }

    let lambdas: Vec<f64> = rows.iter().map(|r| r.report.estimate.lambda.value()).collect();
    let summary = artifacts::summarize_lambdas(&lambdas);
    println!(
        "{} replicates: lambda median {:.4} (IQR {:.4}..{:.4}, {} finite)",
        rows.len(),
        summary.lambda_median,
        summary.lambda_q1,
        summary.lambda_q3,
        summary.n_finite
    );
    artifacts::write_json(
        &dir.join("report.json"),
        &FullRunReport {
            timestamp: timestamp(),
            model: model_name(&cfg.model),
            config: cfg,
            replicates: Some(&rows),
            bacteria_targets: None,
            crack_targets: None,
            crack_params: None,
            summary,
        },
    )?;
    println!("wrote report to {}", dir.join("report.json").display());
    Ok(())
}

fn cmd_report(paths: &[PathBuf]) -> Result<()> {
    for path in paths {
        let text = std::fs::read_to_string(path).map_err(|e| PdmpError::Config {
            context: format!("cannot read report {}: {e}", path.display()),
        })?;
        let v: Value = serde_json::from_str(&text).map_err(|e| PdmpError::Parse {
            line: e.line(),
            context: format!("report {}: {e}", path.display()),
        })?;
        println!("== {} ==", path.display());
        print_report(&v)?;
        println!();
    }
    Ok(())
}

fn print_report(v: &Value) -> Result<()> {
    let model = v.get("model").and_then(Value::as_str).unwrap_or("?");
    println!("model: {model}");
    if let Some(rows) = v.get("replicates").and_then(Value::as_array) {
        println!(
            "{:>4}  {:>10}  {:>10}  {:>7}  {:>7}  {:>7}  {:>8}  xi_star",
            "rep", "lambda", "se", "alpha_g", "alpha_f", "beta_f", "feasible"
        );
        let mut lambdas = Vec::new();
        for row in rows {
            let rep = row.get("replicate").and_then(Value::as_u64).unwrap_or(0);
            let report = row.get("report").cloned().unwrap_or(Value::Null);
            let lambda = json_lambda(report.pointer("/estimate/lambda"));
            let se = json_se(&report);
            let feasible = report
                .pointer("/selection/feasibility/feasible")
                .and_then(Value::as_bool)
                .unwrap_or(false);
            println!(
                "{:>4}  {:>10.4}  {:>10.4}  {:>7.3}  {:>7.3}  {:>7.3}  {:>8}  {}",
                rep,
                lambda,
                se,
                report.pointer("/alpha_g").and_then(Value::as_f64).unwrap_or(f64::NAN),
                report.pointer("/alpha_f").and_then(Value::as_f64).unwrap_or(f64::NAN),
                report.pointer("/beta_f").and_then(Value::as_f64).unwrap_or(f64::NAN),
                feasible,
                json_best_xi(&report)
            );
            lambdas.push(lambda);
        }
        print_lambda_spread(&lambdas);
        Ok(())
    } else if let Some(rows) = v.get("bacteria_targets").and_then(Value::as_array) {
        println!("{:>8}  {:>8}  {:>10}", "x_1", "x_2", "lambda");
        let mut lambdas = Vec::new();
        for row in rows {
            let t = row.get("target").and_then(Value::as_array);
            let (x1, x2) = match t {
                Some(t) if t.len() == 2 => (
                    t[0].as_f64().unwrap_or(f64::NAN),
                    t[1].as_f64().unwrap_or(f64::NAN),
                ),
                _ => (f64::NAN, f64::NAN),
            };
            let lambda = row.get("aggregate").and_then(Value::as_f64).unwrap_or(f64::NAN);
            println!("{x1:>8.3}  {x2:>8.3}  {lambda:>10.4}");
            lambdas.push(lambda);
        }
        print_lambda_spread(&lambdas);
        Ok(())
    } else if let Some(rows) = v.get("crack_targets").and_then(Value::as_array) {
        println!(
            "{:>8}  {:>8}  {:>10}  {:>10}  {:>10}",
            "a_mm", "m_star", "tau_star", "lambda", "se"
        );
        let mut lambdas = Vec::new();
        for row in rows {
            let lambda = json_lambda(row.pointer("/estimate/lambda"));
            println!(
                "{:>8.1}  {:>8.3}  {:>10.4}  {:>10.4}  {:>10.4}",
                row.get("a_target_mm").and_then(Value::as_f64).unwrap_or(f64::NAN),
                row.get("m_star").and_then(Value::as_f64).unwrap_or(f64::NAN),
                row.get("tau_star").and_then(Value::as_f64).unwrap_or(f64::NAN),
                lambda,
                json_se(row)
            );
            lambdas.push(lambda);
        }
        print_lambda_spread(&lambdas);
        Ok(())
    } else {
        Err(PdmpError::Config {
            context: "unrecognized report shape; expected a full-run report.json".into(),
        })
    }
}

fn print_lambda_spread(lambdas: &[f64]) {
    let finite: Vec<f64> = lambdas.iter().copied().filter(|l| l.is_finite()).collect();
    if finite.len() > 1 {
        println!(
            "lambda median {:.4}, IQR {:.4}..{:.4} over {} finite estimates",
            pdmp::diagnostics::quantile(&finite, 0.5),
            pdmp::diagnostics::quantile(&finite, 0.25),
            pdmp::diagnostics::quantile(&finite, 0.75),
            finite.len()
        );
    }
}

/// Decodes the serialized ratio: `{"Finite": v}` or `"Infinite"`.
fn json_lambda(v: Option<&Value>) -> f64 {
    match v {
        Some(Value::Object(m)) => m.get("Finite").and_then(Value::as_f64).unwrap_or(f64::NAN),
        Some(Value::String(s)) if s == "Infinite" => f64::INFINITY,
        _ => f64::NAN,
    }
}

/// Plug-in standard error: `sqrt(sigma2) * clt_scale`.
fn json_se(report: &Value) -> f64 {
    let sigma2 = report.pointer("/estimate/sigma2").and_then(Value::as_f64);
    let scale = report.pointer("/estimate/clt_scale").and_then(Value::as_f64);
    match (sigma2, scale) {
        (Some(s2), Some(c)) if s2 >= 0.0 => s2.sqrt() * c,
        _ => f64::NAN,
    }
}

fn json_best_xi(report: &Value) -> String {
    let best = report.pointer("/selection/best").and_then(Value::as_u64).unwrap_or(0);
    let xi = report
        .pointer(&format!("/selection/nodes/{best}/xi"))
        .and_then(Value::as_array);
    match xi {
        Some(xs) => {
            let parts: Vec<String> = xs
                .iter()
                .map(|x| format!("{:.4}", x.as_f64().unwrap_or(f64::NAN)))
                .collect();
            format!("[{}]", parts.join(", "))
        }
        None => "[?]".into(),
    }
}

fn cmd_print_config(model: Option<&str>) -> Result<()> {
    let name = model.unwrap_or("tcp");
    let model: ModelConfig = serde_json::from_value(serde_json::json!({ "kind": name }))
        .map_err(|e| PdmpError::Config { context: format!("unknown model {name}: {e}") })?;
    let cfg = RunConfig::template(model);
    let text = serde_json::to_string_pretty(&cfg).map_err(|e| PdmpError::Config {
        context: format!("cannot serialize the template: {e}"),
    })?;
    println!("{text}");
    Ok(())
}
