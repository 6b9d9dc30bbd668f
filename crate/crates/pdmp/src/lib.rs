//! Simulation and nonparametric estimation for piecewise-deterministic
//! Markov processes.
//!
//! A process alternates deterministic motion along a flow with random
//! jumps: a jump fires either from a state-dependent rate or, forcibly, when
//! the flow reaches the domain boundary. The crate simulates the embedded
//! chain of post-jump states and interarrival times, and estimates the jump
//! rate from such records with recursive kernel smoothers whose bandwidths
//! shrink in the record index.
//!
//! The estimation pieces compose into a pipeline: trace the reverse flow
//! curve of a target state, pick bandwidth exponents by cross-validating
//! over a thin tube around the curve, select the best-supported curve node,
//! and form the jump-rate ratio there with a plug-in confidence scale.
//!
//! [`models`] ships four ready processes: a transmission-window model, a
//! run-and-tumble swim model, a drifting benchmark with closed-form laws,
//! and a fatigue-crack growth model estimated in parameter space.

pub mod bandwidth_cv;
pub mod diagnostics;
pub mod error;
pub mod estimators;
pub mod flow_geometry;
pub mod kernels;
pub mod model;
pub mod models;
pub mod numeric;
pub mod pipeline;
pub mod rng;
pub mod selector;
pub mod simulate;
pub mod state;

pub use bandwidth_cv::{
    choose_alpha_beta_f, choose_alpha_g, cv_error_f, cv_error_g, default_exponent_grid,
    direct_cv_error, prepare_crossings, split_chain, CvReport, ValCrossing,
};
pub use error::{PdmpError, Result};
pub use estimators::{batch_eval, Estimates, EstimatorState, QueryPoint, Ratio, RawSums};
pub use flow_geometry::{
    build_tube, default_curve_step, disc_crossing, reverse_curve, tube_hit, CurveNode,
    ReverseCurve, Tube, TubeCrossing,
};
pub use kernels::{
    admissible, admissible_g, check_initial_bandwidths, BandwidthFeasibility, BandwidthSchedule,
    BandwidthTable, Kernel, KernelShape,
};
pub use model::{
    exit_time_backward, exit_time_forward, ExitTime, PdmpModel, SolverSettings,
};
pub use pipeline::{
    bacteria_scenario, crack_scenario, run_target_pipeline, simulate_main_val, tcp_scenario,
    BacteriaTargetReport, CrackTargetReport, FixedBandwidths, PipelineReport, PipelineSettings,
    ValidationPlan,
};
pub use rng::SeedSequence;
pub use selector::{
    clt_scale, estimate_jump_rate, estimated_criterion, evaluate_criterion, plugin_variance,
    select_xi_star, JumpRateEstimate, NodeEvaluation, Selection, SelectorOptions,
};
pub use simulate::{
    invert_hazard_level, sample_interjump, simulate_chain, EmbeddedChain, HazardInversion,
    JumpMethod,
};
pub use state::State;
