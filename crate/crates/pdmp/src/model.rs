//! The model abstraction: deterministic flow, jump rate, jump kernel,
//! and the exit-time solvers built on top of it.

use rand::RngCore;

use crate::error::{PdmpError, Result};
use crate::state::State;

/// Time at which the flow started from a state leaves the domain.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ExitTime {
    At(f64),
    /// The flow stays in the domain forever (or beyond the solver horizon).
    Never,
}

impl ExitTime {
    pub fn as_option(self) -> Option<f64> {
        match self {
            ExitTime::At(t) => Some(t),
            ExitTime::Never => None,
        }
    }

    pub fn is_finite(self) -> bool {
        matches!(self, ExitTime::At(_))
    }
}

/// Tolerances and horizons for the generic solvers.
#[derive(Clone, Copy, Debug)]
pub struct SolverSettings {
    /// Flows that stay inside the domain this long count as never exiting.
    pub exit_horizon: f64,
    /// Absolute time tolerance of exit and jump-time bisection.
    pub exit_tol: f64,
    /// Relative tolerance of hazard quadrature.
    pub quad_tol: f64,
    /// First bracketing step of the doubling searches.
    pub initial_step: f64,
}

impl Default for SolverSettings {
    fn default() -> Self {
        SolverSettings {
            exit_horizon: 1e6,
            exit_tol: 1e-9,
            quad_tol: 1e-8,
            initial_step: 0.0625,
        }
    }
}

/// A piecewise-deterministic Markov process on an open domain `E` of `R^d`.
///
/// Between jumps the state follows the deterministic `flow`; jumps occur at
/// the rate `rate` along the flow, or are forced when the flow reaches the
/// domain boundary; the post-jump state is drawn by `sample_post_jump`.
///
/// The optional methods expose closed-form structure. Each default returns
/// `None`, meaning "not available", and the generic solvers take over.
pub trait PdmpModel: Sync {
    fn name(&self) -> &'static str;

    fn dim(&self) -> usize;

    /// `Phi(x, t)`. Must be a semigroup in `t` and accept negative times
    /// (flowing backwards), as long as the result stays meaningful.
    fn flow(&self, x: &[f64], t: f64) -> Result<State>;

    /// Jump rate `lambda(x) >= 0`.
    fn rate(&self, x: &[f64]) -> Result<f64>;

    /// Whether `x` lies in the open domain `E`.
    fn in_domain(&self, x: &[f64]) -> bool;

    /// Draws the post-jump state given the pre-jump state `x`. `boundary`
    /// tells the kernel the jump was forced by the domain boundary.
    fn sample_post_jump(&self, x: &[f64], boundary: bool, rng: &mut dyn RngCore)
        -> Result<State>;

    /// Closed-form forward exit time, if the model has one.
    fn analytic_exit_forward(&self, _x: &[f64]) -> Option<ExitTime> {
        None
    }

    /// Closed-form backward exit time (how long the flow has been inside
    /// the domain before reaching `x`), if the model has one.
    fn analytic_exit_backward(&self, _x: &[f64]) -> Option<ExitTime> {
        None
    }

    /// Closed-form solution `t` of `int_0^t rate(Phi(x, s)) ds = level`,
    /// ignoring the domain boundary. `None` means "use the generic solver".
    fn analytic_interarrival(&self, _x: &[f64], _level: f64) -> Option<Result<f64>> {
        None
    }

    /// An upper bound for the rate along `s -> Phi(x, s)`, `s` in
    /// `[0, horizon]`. Required by thinning; the simulator rejects samples
    /// that violate the bound, so it is part of the model contract.
    fn rate_bound_along_flow(&self, _x: &[f64], _horizon: f64) -> Option<f64> {
        None
    }

    /// `d/dt Phi(x, t)` at `t = 0`, if available in closed form.
    fn flow_velocity(&self, _x: &[f64]) -> Option<Vec<f64>> {
        None
    }
}

/// Forward exit time of the flow from `x`, using the model's closed form
/// when present and a doubling bracket plus bisection otherwise.
///
/// Starting outside the domain is an error. A flow evaluation error while
/// probing counts as "outside": a flow that leaves its representable range
/// has certainly left the domain.
pub fn exit_time_forward(
    model: &dyn PdmpModel,
    settings: &SolverSettings,
    x: &[f64],
) -> Result<ExitTime> {
    if !model.in_domain(x) {
        return Err(PdmpError::OutsideDomain {
            context: format!("exit time from {x:?}"),
        });
    }
    if let Some(exit) = model.analytic_exit_forward(x) {
        return Ok(exit);
    }
    solve_exit(model, settings, x, 1.0)
}

/// Backward exit time: largest `t >= 0` such that the reverse flow
/// `s -> Phi(x, -s)` stays in the domain on `[0, t]`.
pub fn exit_time_backward(
    model: &dyn PdmpModel,
    settings: &SolverSettings,
    x: &[f64],
) -> Result<ExitTime> {
    if !model.in_domain(x) {
        return Err(PdmpError::OutsideDomain {
            context: format!("exit time from {x:?}"),
        });
    }
    if let Some(exit) = model.analytic_exit_backward(x) {
        return Ok(exit);
    }
    solve_exit(model, settings, x, -1.0)
}

fn solve_exit(
    model: &dyn PdmpModel,
    settings: &SolverSettings,
    x: &[f64],
    direction: f64,
) -> Result<ExitTime> {
    let inside = |t: f64| -> bool {
        match model.flow(x, direction * t) {
            Ok(y) => model.in_domain(&y),
            Err(_) => false,
        }
    };
    let mut lo = 0.0;
    let mut hi = settings.initial_step;
    while inside(hi) {
        lo = hi;
        hi *= 2.0;
        if hi > settings.exit_horizon {
            return Ok(ExitTime::Never);
        }
    }
    // Bisect [lo, hi] with Phi(x, lo) inside, Phi(x, hi) outside; return the
    // inside endpoint so the exit state itself still lies in the domain.
    while hi - lo > settings.exit_tol {
        let mid = 0.5 * (lo + hi);
        if inside(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(ExitTime::At(lo))
}

/// Flow velocity at `x`: the model's closed form when present, otherwise a
/// central difference of the flow with step `h`.
pub fn velocity(model: &dyn PdmpModel, x: &[f64], h: f64) -> Result<Vec<f64>> {
    if let Some(v) = model.flow_velocity(x) {
        return Ok(v);
    }
    let fwd = model.flow(x, h)?;
    let bwd = model.flow(x, -h)?;
    Ok(fwd
        .iter()
        .zip(bwd.iter())
        .map(|(a, b)| (a - b) / (2.0 * h))
        .collect())
}
