//! End-to-end estimation pipeline: from a chain and a target point to a
//! selected curve node and a jump-rate estimate, with bandwidth exponents
//! chosen by cross-validation unless fixed by the caller.

use serde::Serialize;

use crate::bandwidth_cv::{
    choose_alpha_beta_f, choose_alpha_g, prepare_crossings, split_chain, CvReport, ValCrossing,
};
use crate::error::{PdmpError, Result};
use crate::estimators::Ratio;
use crate::flow_geometry::{build_tube, default_curve_step, reverse_curve, ReverseCurve};
use crate::kernels::{admissible, admissible_g, BandwidthSchedule, Kernel, KernelShape};
use crate::model::{PdmpModel, SolverSettings};
use crate::models::bacteria::{
    aggregate_bacteria_lambda, build_bacteria, default_angles, default_targets,
};
use crate::models::crack::{
    build_crack_parameter_space, parameter_curve, switches_to_chain, CrackParams, SwitchRecord,
};
use crate::models::tcp::build_tcp;
use crate::rng::SeedSequence;
use crate::selector::{estimate_jump_rate, select_xi_star, JumpRateEstimate, Selection, SelectorOptions};
use crate::simulate::{simulate_chain, EmbeddedChain, JumpMethod};

/// Bandwidth exponents supplied by the caller instead of cross-validated.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct FixedBandwidths {
    /// Spatial exponent of the survival (selection) schedule.
    pub alpha_g: f64,
    /// Exponents of the density schedule.
    pub alpha_f: f64,
    pub beta_f: f64,
}

/// Everything the pipeline needs besides the model, the chain and the
/// target point.
#[derive(Clone, Debug)]
pub struct PipelineSettings {
    pub solver: SolverSettings,
    /// Shape shared by the spatial and the time kernel.
    pub shape: KernelShape,
    /// Initial bandwidths of every schedule.
    pub v0: f64,
    pub w0: f64,
    /// Node spacing of the reverse curve; zero picks a spacing that yields
    /// at least `min_curve_nodes` nodes.
    pub curve_step: f64,
    pub min_curve_nodes: usize,
    /// Cap on the backward horizon of the curve.
    pub curve_cap: f64,
    /// Tube radius of the survival criterion.
    pub rho: f64,
    /// Tube radius and time window of the density criterion.
    pub rho2: f64,
    pub alpha_grid: Vec<f64>,
    pub beta_grid: Vec<f64>,
    /// Skips cross-validation entirely when set.
    pub fixed: Option<FixedBandwidths>,
    pub strict_feasibility: bool,
}

impl Default for PipelineSettings {
    fn default() -> Self {
        PipelineSettings {
            solver: SolverSettings::default(),
            shape: KernelShape::Epanechnikov,
            // Large enough that late recursive windows still catch records
            // at moderate sample sizes; narrow prefactors leave the steep
            // half of the exponent grid empty at the target.
            v0: 0.3,
            w0: 0.3,
            curve_step: 0.0,
            min_curve_nodes: 100,
            curve_cap: 1.0,
            rho: 0.01,
            rho2: 0.1,
            alpha_grid: crate::bandwidth_cv::default_exponent_grid(),
            beta_grid: crate::bandwidth_cv::default_exponent_grid(),
            fixed: None,
            strict_feasibility: false,
        }
    }
}

/// Where the validation records come from.
pub enum ValidationPlan<'a> {
    /// An independently simulated chain.
    Chain(&'a EmbeddedChain),
    /// Carve the head of the main chain off; the pieces come from one
    /// trajectory, so reports flag the split as approximate.
    Split,
    /// No validation data. Only valid with fixed bandwidths.
    None,
}

/// The full outcome of one target: the curve, the chosen exponents, the
/// selected node and the jump-rate estimate there.
#[derive(Clone, Debug, Serialize)]
pub struct PipelineReport {
    pub model: String,
    pub target: Vec<f64>,
    pub curve_step: f64,
    pub curve_nodes: usize,
    pub curve_horizon: f64,
    pub tube_g_contained: bool,
    pub tube_f_contained: bool,
    pub n_main: usize,
    pub n_val: usize,
    /// The validation head was carved off the main trajectory.
    pub approximate_split: bool,
    pub cv_g: Option<CvReport>,
    pub cv_f: Option<CvReport>,
    pub alpha_g: f64,
    pub alpha_f: f64,
    pub beta_f: f64,
    /// Admissibility of the density exponents in the model dimension.
    pub admissible_f: bool,
    /// The spatial-only admissibility band of the survival exponent,
    /// reported but never enforced.
    pub admissible_g_band: bool,
    pub selection: Selection,
    pub estimate: JumpRateEstimate,
}

/// Simulates a main and a validation chain on separate seed streams.
pub fn simulate_main_val(
    model: &dyn PdmpModel,
    solver: &SolverSettings,
    method: JumpMethod,
    x0: &[f64],
    n: usize,
    n_val: usize,
    seed: u64,
) -> Result<(EmbeddedChain, EmbeddedChain)> {
    let seq = SeedSequence::new(seed);
    let main = simulate_chain(model, solver, method, x0, n, &mut seq.stream(0))?;
    let val = simulate_chain(model, solver, method, x0, n_val, &mut seq.stream(1))?;
    Ok((main, val))
}

fn trace_curve(
    model: &dyn PdmpModel,
    s: &PipelineSettings,
    x: &[f64],
) -> Result<(ReverseCurve, f64)> {
    let step = if s.curve_step > 0.0 {
        s.curve_step
    } else {
        default_curve_step(model, &s.solver, x, s.curve_cap, s.min_curve_nodes)?
    };
    let curve = reverse_curve(model, &s.solver, x, step, s.curve_cap)?;
    if curve.is_empty() {
        return Err(PdmpError::Geometry {
            context: format!("target {x:?} has no backward reach at step {step}"),
        });
    }
    Ok((curve, step))
}

/// Runs the whole estimation at one target point.
pub fn run_target_pipeline(
    model: &dyn PdmpModel,
    s: &PipelineSettings,
    chain: &EmbeddedChain,
    val_plan: ValidationPlan,
    x: &[f64],
) -> Result<PipelineReport> {
    if x.len() != model.dim() {
        return Err(PdmpError::DimensionMismatch { expected: model.dim(), got: x.len() });
    }
    let kernel_space = Kernel::new(s.shape, model.dim());
    let kernel_time = Kernel::new(s.shape, 1);

    let split_storage;
    let (main, val, approximate_split): (&EmbeddedChain, Option<&EmbeddedChain>, bool) =
        match val_plan {
            ValidationPlan::Chain(v) => (chain, Some(v), false),
            ValidationPlan::Split => {
                split_storage = split_chain(chain);
                (&split_storage.0, Some(&split_storage.1), true)
            }
            ValidationPlan::None => (chain, None, false),
        };

    let (curve, step) = trace_curve(model, s, x)?;
    let tube_g = build_tube(model, &s.solver, &curve, s.rho)?;
    let tube_f = build_tube(model, &s.solver, &curve, s.rho2)?;

    // The crossing scan does not depend on the radius, so one pass serves
    // both criteria. It is also pointless without cross-validation.
    let crossings: Vec<ValCrossing> = match (&s.fixed, val) {
        (None, Some(v)) => {
            let max_time = 2.0 * curve.horizon;
            prepare_crossings(model, &s.solver, &tube_g, v, max_time)?
        }
        (None, None) => {
            return Err(PdmpError::Config {
                context: "cross-validation needs validation records; provide a chain, \
                          request a split, or fix the bandwidths"
                    .into(),
            })
        }
        (Some(_), _) => Vec::new(),
    };

    let (alpha_g, alpha_f, beta_f, cv_g, cv_f) = match &s.fixed {
        Some(fixed) => (fixed.alpha_g, fixed.alpha_f, fixed.beta_f, None, None),
        None => {
            let n_val = val.map_or(0, EmbeddedChain::len);
            let report_g = choose_alpha_g(
                main,
                &curve,
                &crossings,
                n_val,
                &kernel_space,
                &kernel_time,
                s.v0,
                s.w0,
                &s.alpha_grid,
                s.rho,
            )?;
            let report_f = choose_alpha_beta_f(
                main,
                &curve,
                &crossings,
                n_val,
                &kernel_space,
                &kernel_time,
                s.v0,
                s.w0,
                &s.alpha_grid,
                &s.beta_grid,
                s.rho2,
                s.rho2,
            )?;
            (
                report_g.chosen_alpha,
                report_f.chosen_alpha,
                report_f.chosen_beta.expect("density search returns a beta"),
                Some(report_g),
                Some(report_f),
            )
        }
    };

    // The survival sums ignore the time exponent; 0.5 is a placeholder.
    let schedule_g = BandwidthSchedule::new(s.v0, alpha_g, s.w0, 0.5);
    let schedule_f = BandwidthSchedule::new(s.v0, alpha_f, s.w0, beta_f);
    // Selection scans the criterion landscape with constant windows: a
    // decaying schedule turns the profile into a comb of late records and
    // the argmax jumps between record clusters. The tuned schedules enter
    // only the estimate itself.
    let schedule_sel = BandwidthSchedule::new(s.v0, 0.0, s.w0, 0.0);

    let selection = select_xi_star(
        model,
        &s.solver,
        main,
        &kernel_space,
        &kernel_time,
        schedule_sel,
        &curve.nodes,
        SelectorOptions { strict_feasibility: s.strict_feasibility },
    )?;
    let best = selection.best_node();
    let estimate = estimate_jump_rate(
        main,
        &kernel_space,
        &kernel_time,
        schedule_f,
        schedule_g,
        &best.xi,
        best.tau,
    )?;

    Ok(PipelineReport {
        model: model.name().to_string(),
        target: x.to_vec(),
        curve_step: step,
        curve_nodes: curve.len(),
        curve_horizon: curve.horizon,
        tube_g_contained: tube_g.contained,
        tube_f_contained: tube_f.contained,
        n_main: main.len(),
        n_val: val.map_or(0, EmbeddedChain::len),
        approximate_split,
        cv_g,
        cv_f,
        alpha_g,
        alpha_f,
        beta_f,
        admissible_f: admissible(alpha_f, beta_f, model.dim()),
        admissible_g_band: admissible_g(alpha_g, model.dim()),
        selection,
        estimate,
    })
}

/// One window-size target: simulates the main and validation chains and
/// runs the full pipeline at `target`.
pub fn tcp_scenario(
    s: &PipelineSettings,
    n: usize,
    n_val: usize,
    seed: u64,
    target: &[f64],
) -> Result<PipelineReport> {
    let model = build_tcp();
    let (main, val) =
        simulate_main_val(&model, &s.solver, JumpMethod::Auto, &[0.3, 0.6], n, n_val, seed)?;
    run_target_pipeline(&model, s, &main, ValidationPlan::Chain(&val), target)
}

/// Jump-rate estimates of the swim model at one position, across directions.
#[derive(Clone, Debug, Serialize)]
pub struct BacteriaTargetReport {
    pub target: [f64; 2],
    pub angles: Vec<f64>,
    /// One entry per angle; non-finite when the ratio degenerated or the
    /// direction failed.
    pub lambdas: Vec<f64>,
    /// Mean over the finite entries.
    pub aggregate: f64,
}

/// Runs the swim model over the default 3x3 position grid and 16
/// directions, one shared chain, fixed bandwidths. Cross-validation over
/// 144 tubes would dominate the runtime for no benefit: the aggregation
/// over directions already averages the exponent sensitivity out.
pub fn bacteria_scenario(
    s: &PipelineSettings,
    n: usize,
    seed: u64,
) -> Result<Vec<BacteriaTargetReport>> {
    if s.fixed.is_none() {
        return Err(PdmpError::Config {
            context: "the swim scenario runs on fixed bandwidths".into(),
        });
    }
    let model = build_bacteria();
    let seq = SeedSequence::new(seed);
    let chain = simulate_chain(
        &model,
        &s.solver,
        JumpMethod::Auto,
        &[0.0, 0.0, 0.0],
        n,
        &mut seq.stream(0),
    )?;
    let mut out = Vec::new();
    for target in default_targets() {
        let angles = default_angles();
        let mut lambdas = Vec::with_capacity(angles.len());
        for &angle in &angles {
            let x = [target[0], target[1], angle];
            let lambda = match run_target_pipeline(&model, s, &chain, ValidationPlan::None, &x) {
                Ok(report) => match report.estimate.lambda {
                    Ratio::Finite(l) => l,
                    _ => f64::NAN,
                },
                // A direction whose curve or selection degenerates is
                // dropped from the aggregate, not fatal.
                Err(_) => f64::NAN,
            };
            lambdas.push(lambda);
        }
        let aggregate = aggregate_bacteria_lambda(&lambdas)?;
        out.push(BacteriaTargetReport { target, angles, lambdas, aggregate });
    }
    Ok(out)
}

/// The crack estimate at one target length.
#[derive(Clone, Debug, Serialize)]
pub struct CrackTargetReport {
    pub a_target_mm: f64,
    /// Selected material parameter.
    pub m_star: f64,
    /// Switch time of the selected node, megacycles.
    pub tau_star: f64,
    pub selection: Selection,
    pub estimate: JumpRateEstimate,
}

/// Estimates the switch rate at each target length from switch records.
/// The state space is the frozen material parameter, so there is no flow
/// tube to cross-validate in; bandwidths are fixed by the caller.
pub fn crack_scenario(
    params: &CrackParams,
    records: &[SwitchRecord],
    targets: &[f64],
    m_grid: &[f64],
    s: &PipelineSettings,
) -> Result<Vec<CrackTargetReport>> {
    let fixed = s.fixed.ok_or_else(|| PdmpError::Config {
        context: "the crack scenario runs on fixed bandwidths".into(),
    })?;
    let space = build_crack_parameter_space(*params);
    let chain = switches_to_chain(params, records)?;
    let kernel_space = Kernel::new(s.shape, 1);
    let kernel_time = Kernel::new(s.shape, 1);
    let schedule_g = BandwidthSchedule::new(s.v0, fixed.alpha_g, s.w0, 0.5);
    let schedule_f = BandwidthSchedule::new(s.v0, fixed.alpha_f, s.w0, fixed.beta_f);
    let mut out = Vec::new();
    for &a in targets {
        let nodes = parameter_curve(params, a, m_grid)?;
        let selection = select_xi_star(
            &space,
            &s.solver,
            &chain,
            &kernel_space,
            &kernel_time,
            schedule_g,
            &nodes,
            SelectorOptions { strict_feasibility: s.strict_feasibility },
        )?;
        let best = selection.best_node();
        let estimate = estimate_jump_rate(
            &chain,
            &kernel_space,
            &kernel_time,
            schedule_f,
            schedule_g,
            &best.xi,
            best.tau,
        )?;
        out.push(CrackTargetReport {
            a_target_mm: a,
            m_star: best.xi[0],
            tau_star: best.tau,
            selection,
            estimate,
        });
    }
    Ok(out)
}
