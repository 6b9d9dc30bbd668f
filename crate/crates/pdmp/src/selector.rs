//! Selection of the estimation point along a reverse curve and the final
//! jump-rate estimate there.
//!
//! The criterion maximised along the curve is the un-normalised
//! `kappa(xi) = G_hat(xi, tau(xi))`: it grows with both the local record
//! density and the chance of surviving past `tau(xi)`, which is exactly
//! where the jump-rate ratio is well conditioned.

use serde::Serialize;

use crate::error::{PdmpError, Result};
use crate::estimators::{EstimatorState, QueryPoint, Ratio};
use crate::flow_geometry::CurveNode;
use crate::kernels::{check_initial_bandwidths, BandwidthFeasibility, BandwidthSchedule, Kernel};
use crate::model::{exit_time_forward, PdmpModel, SolverSettings};
use crate::simulate::EmbeddedChain;

/// Criterion values at one curve node.
#[derive(Clone, Debug, Serialize)]
pub struct NodeEvaluation {
    pub tau: f64,
    pub xi: Vec<f64>,
    /// `G_hat(xi, tau)`, the selection criterion.
    pub kappa: f64,
    /// `nu_hat(xi)`, the spatial density alone.
    pub nu: f64,
}

/// Outcome of scanning a curve.
#[derive(Clone, Debug, Serialize)]
pub struct Selection {
    pub nodes: Vec<NodeEvaluation>,
    /// Index of the selected node.
    pub best: usize,
    /// Direction changes of the criterion along the curve; a rough
    /// roughness diagnostic (0 for a unimodal profile).
    pub oscillations: usize,
    /// Feasibility of the initial bandwidths at the selected node.
    pub feasibility: BandwidthFeasibility,
    /// Nodes passed over as infeasible (strict mode only), in curve order.
    pub excluded: Vec<usize>,
}

impl Selection {
    pub fn best_node(&self) -> &NodeEvaluation {
        &self.nodes[self.best]
    }
}

#[derive(Clone, Copy, Debug)]
pub struct SelectorOptions {
    /// Exclude nodes that violate the bandwidth feasibility condition from
    /// the argmax instead of only flagging the winner.
    pub strict_feasibility: bool,
}

impl Default for SelectorOptions {
    fn default() -> Self {
        SelectorOptions { strict_feasibility: false }
    }
}

/// Evaluates the selection criterion at every node of a curve in one pass
/// over the chain.
pub fn evaluate_criterion(
    chain: &EmbeddedChain,
    kernel_space: &Kernel,
    kernel_time: &Kernel,
    schedule: BandwidthSchedule,
    nodes: &[CurveNode],
) -> Result<Vec<NodeEvaluation>> {
    if nodes.is_empty() {
        return Err(PdmpError::EmptyGrid { context: "criterion curve has no nodes".into() });
    }
    let queries: Vec<QueryPoint> = nodes
        .iter()
        .map(|n| QueryPoint::new(n.xi.clone(), n.tau))
        .collect();
    let mut state =
        EstimatorState::with_queries(kernel_space.clone(), kernel_time.clone(), schedule, queries)?;
    state.accumulate_chain(chain);
    let mut out = Vec::with_capacity(nodes.len());
    for (i, n) in nodes.iter().enumerate() {
        let e = state.estimates(i)?;
        out.push(NodeEvaluation { tau: n.tau, xi: n.xi.clone(), kappa: e.g_hat, nu: e.nu_hat });
    }
    Ok(out)
}

/// Criterion value at one registered query of an accumulated state.
pub fn estimated_criterion(state: &EstimatorState, query_index: usize) -> Result<f64> {
    state.g_hat(query_index)
}

/// Scans a curve (nodes in increasing `tau` order) and selects the node
/// maximising the criterion, ties resolved toward smaller `tau`. The
/// bandwidth feasibility of the winner is checked against the model's exit
/// times; in strict mode infeasible nodes are excluded from the argmax.
pub fn select_xi_star(
    model: &dyn PdmpModel,
    settings: &SolverSettings,
    chain: &EmbeddedChain,
    kernel_space: &Kernel,
    kernel_time: &Kernel,
    schedule: BandwidthSchedule,
    nodes: &[CurveNode],
    options: SelectorOptions,
) -> Result<Selection> {
    let evals = evaluate_criterion(chain, kernel_space, kernel_time, schedule, nodes)?;

    // Candidates by decreasing criterion; the stable sort leaves ties in
    // curve order, so the smaller tau wins.
    let mut order: Vec<usize> = (0..evals.len()).collect();
    order.sort_by(|&a, &b| evals[b].kappa.total_cmp(&evals[a].kappa));

    let feasibility_at = |i: usize| -> BandwidthFeasibility {
        let exact = model.analytic_exit_forward(&evals[i].xi).is_some();
        let exit = |y: &[f64]| -> Option<f64> {
            match exit_time_forward(model, settings, y) {
                Ok(e) => e.as_option(),
                // Probe failures count as an immediate exit: conservative.
                Err(_) => Some(0.0),
            }
        };
        check_initial_bandwidths(
            exit,
            exact,
            &evals[i].xi,
            evals[i].tau,
            schedule.v0,
            schedule.w0,
            kernel_space.support_radius(),
        )
    };

    let mut excluded = Vec::new();
    let mut chosen = None;
    for &i in &order {
        if evals[i].kappa <= 0.0 {
            // Candidates are sorted: nothing positive remains.
            break;
        }
        let feas = feasibility_at(i);
        if options.strict_feasibility && !feas.feasible {
            excluded.push(i);
            continue;
        }
        chosen = Some((i, feas));
        break;
    }
    let (best, feasibility) = chosen.ok_or(PdmpError::SelectionImpossible)?;
    excluded.sort_unstable();

    let mut oscillations = 0usize;
    let mut last_sign = 0i8;
    for w in evals.windows(2) {
        let diff = w[1].kappa - w[0].kappa;
        let sign = if diff > 0.0 {
            1i8
        } else if diff < 0.0 {
            -1i8
        } else {
            0i8
        };
        if sign != 0 {
            if last_sign != 0 && sign != last_sign {
                oscillations += 1;
            }
            last_sign = sign;
        }
    }

    Ok(Selection { nodes: evals, best, oscillations, feasibility, excluded })
}

/// The jump-rate estimate at one point: the density estimate under the `F`
/// schedule over the survival estimate under the `G` schedule.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct JumpRateEstimate {
    pub lambda: Ratio,
    pub f_hat: f64,
    pub g_hat: f64,
    /// Plug-in asymptotic variance; `None` when the ratio degenerates.
    pub sigma2: Option<f64>,
    /// `n^-(1 - alpha d - beta) / 2`, the CLT contraction rate of the `F`
    /// schedule.
    pub clt_scale: f64,
}

/// Estimates the jump rate at `(x, t)` from the chain, smoothing the
/// numerator and denominator with their own schedules.
pub fn estimate_jump_rate(
    chain: &EmbeddedChain,
    kernel_space: &Kernel,
    kernel_time: &Kernel,
    schedule_f: BandwidthSchedule,
    schedule_g: BandwidthSchedule,
    x: &[f64],
    t: f64,
) -> Result<JumpRateEstimate> {
    let d = kernel_space.dim();
    let mut state_f = EstimatorState::with_queries(
        kernel_space.clone(),
        kernel_time.clone(),
        schedule_f,
        vec![QueryPoint::new(x.to_vec(), t)],
    )?;
    state_f.accumulate_chain(chain);
    let f_hat = state_f.f_hat(0)?;

    let mut state_g = EstimatorState::with_queries(
        kernel_space.clone(),
        kernel_time.clone(),
        schedule_g,
        vec![QueryPoint::new(x.to_vec(), t)],
    )?;
    state_g.accumulate_chain(chain);
    let g_hat = state_g.g_hat(0)?;

    let lambda = Ratio::of(f_hat, g_hat);
    let sigma2 = match lambda {
        Ratio::Finite(l) if g_hat > 0.0 => Some(plugin_variance(
            kernel_space.l2_sq(),
            kernel_time.l2_sq(),
            l,
            schedule_f.alpha,
            schedule_f.beta,
            d,
            g_hat,
        )),
        _ => None,
    };
    Ok(JumpRateEstimate {
        lambda,
        f_hat,
        g_hat,
        sigma2,
        clt_scale: clt_scale(chain.len(), schedule_f.alpha, schedule_f.beta, d),
    })
}

/// Plug-in asymptotic variance of the jump-rate estimate:
/// `tau_d^2 tau_1^2 lambda / ((1 + alpha d + beta) kappa)`.
pub fn plugin_variance(
    l2_space: f64,
    l2_time: f64,
    lambda: f64,
    alpha: f64,
    beta: f64,
    d: usize,
    kappa: f64,
) -> f64 {
    l2_space * l2_time * lambda / ((1.0 + alpha * d as f64 + beta) * kappa)
}

/// CLT contraction rate `n^-(1 - alpha d - beta) / 2`.
pub fn clt_scale(n: usize, alpha: f64, beta: f64, d: usize) -> f64 {
    (n as f64).powf(-(1.0 - alpha * d as f64 - beta) / 2.0)
}
