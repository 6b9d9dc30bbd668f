//! Cross-validated choice of the bandwidth exponents.
//!
//! Both criteria compare an integrated square along the reverse curve with
//! an empirical cross term collected from an independent validation chain:
//! a validation record contributes when its forward flow crosses the disc
//! spanning the tube around the curve. Crossings carry no bandwidth or
//! radius dependence, so they are detected once and reused for the whole
//! grid and for every radius.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{PdmpError, Result};
use crate::estimators::{EstimatorState, QueryPoint};
use crate::flow_geometry::{disc_crossing, ReverseCurve, Tube};
use crate::kernels::{admissible, admissible_g, BandwidthSchedule, Kernel};
use crate::model::{PdmpModel, SolverSettings};
use crate::numeric::unit_ball_volume;
use crate::simulate::EmbeddedChain;

/// A validation record whose forward flow crosses the hyperplane of the
/// tube disc: everything the cross terms need, radius-independent.
#[derive(Clone, Debug)]
pub struct ValCrossing {
    /// Index of the record in the validation chain.
    pub idx: usize,
    /// The record's state.
    pub z: Vec<f64>,
    /// Its interarrival time.
    pub s_next: f64,
    /// Crossing time of the disc hyperplane.
    pub theta: f64,
    /// Distance from the disc center at the crossing.
    pub dist: f64,
}

/// Detects the disc crossings of every validation record. The scan is the
/// expensive part of the cross-validation and depends on neither the
/// bandwidths nor the radius, so it runs once per validation chain.
pub fn prepare_crossings(
    model: &dyn PdmpModel,
    settings: &SolverSettings,
    tube: &Tube,
    val: &EmbeddedChain,
    max_time: f64,
) -> Result<Vec<ValCrossing>> {
    let mut out = Vec::new();
    for k in 0..val.len() {
        let z = val.state(k);
        if let Some(c) = disc_crossing(model, settings, tube, z, max_time)? {
            out.push(ValCrossing {
                idx: k,
                z: z.to_vec(),
                s_next: val.interarrival(k),
                theta: c.theta,
                dist: c.dist,
            });
        }
    }
    Ok(out)
}

/// Validation records within `rho` of the disc center at their crossing.
pub fn hit_count(crossings: &[ValCrossing], rho: f64) -> usize {
    crossings.iter().filter(|c| c.dist <= rho).count()
}

/// The disc volume `V_{d-1}(rho)` normalising the cross terms (`2 rho` for
/// `d = 2`, one for `d = 1`).
fn disc_volume(d: usize, rho: f64) -> f64 {
    unit_ball_volume(d - 1) * rho.powi(d as i32 - 1)
}

/// Empirical squared-error criterion for the survival bandwidth exponent:
///
/// ```text
/// int_C kappa_hat^2 dxi  -  2/(n_val V_{d-1}(rho)) sum_k G_hat(Z_k, theta_k)
///                                                  1{dist_k <= rho} 1{S_k+1 > theta_k}
/// ```
///
/// `kappa_hat` and `G_hat` come from the main chain under `schedule`; only
/// `v0` and `alpha` enter them (the survival sums use no time kernel).
/// Returns the criterion and the number of tube hits.
pub fn cv_error_g(
    main: &EmbeddedChain,
    curve: &ReverseCurve,
    crossings: &[ValCrossing],
    n_val: usize,
    kernel_space: &Kernel,
    kernel_time: &Kernel,
    schedule: BandwidthSchedule,
    rho: f64,
) -> Result<(f64, usize)> {
    if curve.is_empty() {
        return Err(PdmpError::EmptyGrid { context: "cross-validation curve has no nodes".into() });
    }
    if n_val == 0 {
        return Err(PdmpError::Config { context: "empty validation chain".into() });
    }
    let n_hits = hit_count(crossings, rho);
    // Only records surviving past their crossing contribute to the sum, so
    // only those need estimator queries.
    let live: Vec<&ValCrossing> =
        crossings.iter().filter(|c| c.dist <= rho && c.s_next > c.theta).collect();

    let mut queries: Vec<QueryPoint> =
        curve.nodes.iter().map(|n| QueryPoint::new(n.xi.clone(), n.tau)).collect();
    for c in &live {
        queries.push(QueryPoint::new(c.z.clone(), c.theta));
    }
    let mut st = EstimatorState::with_queries(
        kernel_space.clone(),
        kernel_time.clone(),
        schedule,
        queries,
    )?;
    st.accumulate_chain(main);

    let mut kappa_sq = Vec::with_capacity(curve.len());
    for j in 0..curve.len() {
        let k = st.g_hat(j)?;
        kappa_sq.push(k * k);
    }
    let first = curve.line_integral(&kappa_sq);

    let mut cross = 0.0;
    for i in 0..live.len() {
        cross += st.g_hat(curve.len() + i)?;
    }
    let second = 2.0 * cross / (n_val as f64 * disc_volume(st.dim(), rho));
    Ok((first - second, n_hits))
}

/// Empirical squared-error criterion for the density bandwidth exponents:
/// the same construction with `F_hat`, a tube of radius `rho1` and a time
/// window of width `rho2` around the crossing time.
pub fn cv_error_f(
    main: &EmbeddedChain,
    curve: &ReverseCurve,
    crossings: &[ValCrossing],
    n_val: usize,
    kernel_space: &Kernel,
    kernel_time: &Kernel,
    schedule: BandwidthSchedule,
    rho1: f64,
    rho2: f64,
) -> Result<(f64, usize)> {
    if curve.is_empty() {
        return Err(PdmpError::EmptyGrid { context: "cross-validation curve has no nodes".into() });
    }
    if n_val == 0 {
        return Err(PdmpError::Config { context: "empty validation chain".into() });
    }
    if rho2 <= 0.0 {
        return Err(PdmpError::Config { context: format!("time window {rho2} must be positive") });
    }
    let n_hits = hit_count(crossings, rho1);
    // Only records whose interarrival falls in the time window contribute
    // to the sum, so only those need estimator queries.
    let live: Vec<&ValCrossing> = crossings
        .iter()
        .filter(|c| c.dist <= rho1 && (c.s_next - c.theta).abs() < 0.5 * rho2)
        .collect();

    let mut queries: Vec<QueryPoint> =
        curve.nodes.iter().map(|n| QueryPoint::new(n.xi.clone(), n.tau)).collect();
    for c in &live {
        queries.push(QueryPoint::new(c.z.clone(), c.theta));
    }
    let mut st = EstimatorState::with_queries(
        kernel_space.clone(),
        kernel_time.clone(),
        schedule,
        queries,
    )?;
    st.accumulate_chain(main);

    let mut f_sq = Vec::with_capacity(curve.len());
    for j in 0..curve.len() {
        let f = st.f_hat(j)?;
        f_sq.push(f * f);
    }
    let first = curve.line_integral(&f_sq);

    let mut cross = 0.0;
    for i in 0..live.len() {
        cross += st.f_hat(curve.len() + i)?;
    }
    let second = 2.0 * cross / (n_val as f64 * disc_volume(st.dim(), rho1) * rho2);
    Ok((first - second, n_hits))
}

/// Outcome of a grid search over bandwidth exponents.
#[derive(Clone, Debug, Serialize)]
pub struct CvReport {
    pub alphas: Vec<f64>,
    /// Present for the density criterion only.
    pub betas: Option<Vec<f64>>,
    /// One entry per alpha, or row-major over `(alpha, beta)`.
    pub errors: Vec<f64>,
    pub chosen_alpha: f64,
    pub chosen_beta: Option<f64>,
    pub rho: f64,
    pub rho2: Option<f64>,
    pub n_main: usize,
    pub n_val: usize,
    /// Validation records landing in the tube; zero hits leave the second
    /// term empty and the report is still produced, flagged here.
    pub hit_count: usize,
}

impl CvReport {
    pub fn no_hits(&self) -> bool {
        self.hit_count == 0
    }
}

/// Grid values `{0.05, 0.10, ..., 0.50}`, the default for both exponents.
pub fn default_exponent_grid() -> Vec<f64> {
    (1..=10).map(|i| i as f64 * 0.05).collect()
}

/// Minimises the survival criterion over `alphas`; ties resolve to the
/// smaller exponent. Grid points are independent and evaluated in parallel.
#[allow(clippy::too_many_arguments)]
pub fn choose_alpha_g(
    main: &EmbeddedChain,
    curve: &ReverseCurve,
    crossings: &[ValCrossing],
    n_val: usize,
    kernel_space: &Kernel,
    kernel_time: &Kernel,
    v0: f64,
    w0: f64,
    alphas: &[f64],
    rho: f64,
) -> Result<CvReport> {
    if alphas.is_empty() {
        return Err(PdmpError::EmptyGrid { context: "alpha grid is empty".into() });
    }
    let errors: Vec<f64> = alphas
        .par_iter()
        .map(|&alpha| {
            // The survival sums ignore the time exponent; any value serves.
            let schedule = BandwidthSchedule::new(v0, alpha, w0, 0.5);
            cv_error_g(main, curve, crossings, n_val, kernel_space, kernel_time, schedule, rho)
                .map(|(e, _)| e)
        })
        .collect::<Result<_>>()?;
    // Argmin over the band where the survival estimator satisfies its CLT;
    // outside it the criterion has nothing to rank. The report still
    // carries the whole profile. Falls back to the full grid when the band
    // misses every grid point.
    let d = kernel_space.dim();
    let eligible: Vec<usize> =
        (0..alphas.len()).filter(|&i| admissible_g(alphas[i], d)).collect();
    let candidates: Vec<usize> =
        if eligible.is_empty() { (0..alphas.len()).collect() } else { eligible };
    let mut best = candidates[0];
    for &i in &candidates {
        if errors[i] < errors[best] {
            best = i;
        }
    }
    Ok(CvReport {
        alphas: alphas.to_vec(),
        betas: None,
        errors,
        chosen_alpha: alphas[best],
        chosen_beta: None,
        rho,
        rho2: None,
        n_main: main.len(),
        n_val,
        hit_count: hit_count(crossings, rho),
    })
}

/// Minimises the density criterion over the `alphas x betas` grid
/// (row-major); ties resolve to the smaller alpha, then the smaller beta.
#[allow(clippy::too_many_arguments)]
pub fn choose_alpha_beta_f(
    main: &EmbeddedChain,
    curve: &ReverseCurve,
    crossings: &[ValCrossing],
    n_val: usize,
    kernel_space: &Kernel,
    kernel_time: &Kernel,
    v0: f64,
    w0: f64,
    alphas: &[f64],
    betas: &[f64],
    rho1: f64,
    rho2: f64,
) -> Result<CvReport> {
    if alphas.is_empty() || betas.is_empty() {
        return Err(PdmpError::EmptyGrid { context: "exponent grid is empty".into() });
    }
    let grid: Vec<(f64, f64)> = alphas
        .iter()
        .flat_map(|&a| betas.iter().map(move |&b| (a, b)))
        .collect();
    let errors: Vec<f64> = grid
        .par_iter()
        .map(|&(alpha, beta)| {
            let schedule = BandwidthSchedule::new(v0, alpha, w0, beta);
            cv_error_f(
                main, curve, crossings, n_val, kernel_space, kernel_time, schedule, rho1, rho2,
            )
            .map(|(e, _)| e)
        })
        .collect::<Result<_>>()?;
    // The full grid is reported, but the argmin only trusts cells inside the
    // admissible band: outside it the estimator is too erratic for the
    // criterion to rank, and a thin validation sample can hand the minimum
    // to a bandwidth schedule that is empty at the target.
    let d = kernel_space.dim();
    let eligible: Vec<usize> = (0..grid.len())
        .filter(|&i| admissible(grid[i].0, grid[i].1, d))
        .collect();
    let candidates: Vec<usize> =
        if eligible.is_empty() { (0..grid.len()).collect() } else { eligible };
    let mut best = candidates[0];
    for &i in &candidates {
        if errors[i] < errors[best] {
            best = i;
        }
    }
    Ok(CvReport {
        alphas: alphas.to_vec(),
        betas: Some(betas.to_vec()),
        errors,
        chosen_alpha: grid[best].0,
        chosen_beta: Some(grid[best].1),
        rho: rho1,
        rho2: Some(rho2),
        n_main: main.len(),
        n_val,
        hit_count: hit_count(crossings, rho1),
    })
}

/// Splits one simulated trajectory into a validation head of `ceil(n/11)`
/// records and a main tail. The pieces stem from a single trajectory, so
/// they are only approximately independent; reports carry that flag.
pub fn split_chain(chain: &EmbeddedChain) -> (EmbeddedChain, EmbeddedChain) {
    let n_val = chain.len().div_ceil(11);
    let val = chain.sub_chain(0..n_val);
    let main = chain.sub_chain(n_val..chain.len());
    (main, val)
}

/// The criterion with its population cross term, for models whose `kappa`
/// is known in closed form: `int k_hat^2 - 2 int k_hat kappa` along the
/// curve. Shares the quadrature with the empirical criterion, so the two
/// are directly comparable.
pub fn direct_cv_error(curve: &ReverseCurve, estimated: &[f64], analytic: &[f64]) -> f64 {
    let sq: Vec<f64> = estimated.iter().map(|k| k * k).collect();
    let cross: Vec<f64> = estimated.iter().zip(analytic).map(|(e, a)| e * a).collect();
    curve.line_integral(&sq) - 2.0 * curve.line_integral(&cross)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flow_geometry::{build_tube, reverse_curve, CurveNode};
    use crate::state::State;
    use rand::RngCore;

    struct Line;

    impl PdmpModel for Line {
        fn name(&self) -> &'static str {
            "line"
        }
        fn dim(&self) -> usize {
            1
        }
        fn flow(&self, x: &[f64], t: f64) -> Result<State> {
            Ok(State::new(vec![x[0] + t]))
        }
        fn rate(&self, _x: &[f64]) -> Result<f64> {
            Ok(1.0)
        }
        fn in_domain(&self, x: &[f64]) -> bool {
            x[0] > 0.0 && x[0] < 1.0
        }
        fn sample_post_jump(
            &self,
            _x: &[f64],
            _boundary: bool,
            _rng: &mut dyn RngCore,
        ) -> Result<State> {
            Ok(State::new(vec![0.5]))
        }
    }

    fn toy_curve() -> ReverseCurve {
        ReverseCurve {
            base: vec![0.8],
            step: 0.1,
            horizon: 0.8,
            nodes: (0..=5)
                .map(|j| CurveNode {
                    tau: j as f64 * 0.1,
                    xi: vec![0.8 - j as f64 * 0.1],
                    speed: 1.0,
                })
                .collect(),
        }
    }

    fn crossing(z: f64, s_next: f64, theta: f64, dist: f64) -> ValCrossing {
        ValCrossing { idx: 0, z: vec![z], s_next, theta, dist }
    }

    fn toy_main() -> EmbeddedChain {
        let mut chain = EmbeddedChain::new(1);
        for i in 0..30 {
            let z = 0.15 + 0.7 * ((i * 7 % 13) as f64 / 13.0);
            chain.push(&[z], 0.1 + ((i * 3 % 5) as f64) * 0.2, false);
        }
        chain
    }

    #[test]
    fn crossings_come_from_the_flow() {
        let s = SolverSettings::default();
        let curve = reverse_curve(&Line, &s, &[0.8], 0.1, 10.0).unwrap();
        let tube = build_tube(&Line, &s, &curve, 0.05).unwrap();
        let mut val = EmbeddedChain::new(1);
        val.push(&[0.3], 0.6, false);
        val.push(&[0.45], 0.2, false);
        val.push(&[0.9], 1.0, false);
        let crossings = prepare_crossings(&Line, &s, &tube, &val, 2.0).unwrap();
        // The downstream record at 0.9 never reaches the hyperplane.
        assert_eq!(crossings.len(), 2);
        assert!((crossings[0].theta - 0.5).abs() < 1e-8);
        assert!((crossings[1].theta - 0.35).abs() < 1e-8);
        assert!(crossings.iter().all(|c| c.dist < 1e-8));
        assert_eq!(crossings[1].idx, 1);
        assert_eq!(hit_count(&crossings, 0.05), 2);
    }

    #[test]
    fn first_term_ignores_the_validation_chain() {
        let main = toy_main();
        let curve = toy_curve();
        let ks = Kernel::epanechnikov(1);
        let kt = Kernel::epanechnikov(1);
        let schedule = BandwidthSchedule::new(0.3, 0.2, 0.3, 0.4);
        let (plain, h0) =
            cv_error_g(&main, &curve, &[], 50, &ks, &kt, schedule, 0.05).unwrap();
        assert_eq!(h0, 0);
        // A miss (dist beyond rho) changes nothing; a hit only shifts the
        // cross term.
        let miss = crossing(0.5, 1.0, 0.3, 0.2);
        let (with_miss, h1) =
            cv_error_g(&main, &curve, &[miss], 50, &ks, &kt, schedule, 0.05).unwrap();
        assert_eq!(h1, 0);
        assert_eq!(plain, with_miss);
        let hit = crossing(0.5, 1.0, 0.3, 0.02);
        let (with_hit, h2) =
            cv_error_g(&main, &curve, &[hit], 50, &ks, &kt, schedule, 0.05).unwrap();
        assert_eq!(h2, 1);
        assert!(with_hit < plain);
        // d = 1: the cross term is 2/n_val times the survival estimate.
        let mut st = EstimatorState::with_queries(
            ks.clone(),
            kt.clone(),
            schedule,
            vec![QueryPoint::new(vec![0.5], 0.3)],
        )
        .unwrap();
        st.accumulate_chain(&main);
        let expected = plain - 2.0 * st.g_hat(0).unwrap() / 50.0;
        assert!((with_hit - expected).abs() < 1e-15);
    }

    #[test]
    fn dead_records_leave_no_cross_term() {
        let main = toy_main();
        let curve = toy_curve();
        let ks = Kernel::epanechnikov(1);
        let kt = Kernel::epanechnikov(1);
        let schedule = BandwidthSchedule::new(0.3, 0.2, 0.3, 0.4);
        let (plain, _) = cv_error_g(&main, &curve, &[], 50, &ks, &kt, schedule, 0.05).unwrap();
        // The record jumped before reaching the disc: s_next < theta.
        let dead = crossing(0.5, 0.1, 0.3, 0.0);
        let (with_dead, h) =
            cv_error_g(&main, &curve, &[dead], 50, &ks, &kt, schedule, 0.05).unwrap();
        assert_eq!(h, 1);
        assert_eq!(plain, with_dead);
    }

    #[test]
    fn f_window_gates_the_cross_term() {
        let main = toy_main();
        let curve = toy_curve();
        let ks = Kernel::epanechnikov(1);
        let kt = Kernel::epanechnikov(1);
        let schedule = BandwidthSchedule::new(0.3, 0.2, 0.3, 0.4);
        let (plain, _) =
            cv_error_f(&main, &curve, &[], 50, &ks, &kt, schedule, 0.1, 0.2).unwrap();
        // Inside the window |s - theta| < rho2/2.
        let near = crossing(0.5, 0.35, 0.3, 0.0);
        let (with_near, _) =
            cv_error_f(&main, &curve, &[near], 50, &ks, &kt, schedule, 0.1, 0.2).unwrap();
        assert!(with_near < plain);
        // Outside it.
        let far = crossing(0.5, 0.45, 0.3, 0.0);
        let (with_far, _) =
            cv_error_f(&main, &curve, &[far], 50, &ks, &kt, schedule, 0.1, 0.2).unwrap();
        assert_eq!(plain, with_far);
    }

    #[test]
    fn flat_criterion_picks_the_smallest_exponents() {
        // A main chain far from the curve: every error is exactly zero.
        let mut main = EmbeddedChain::new(1);
        for _ in 0..10 {
            main.push(&[0.05], 0.1, false);
        }
        let mut curve = toy_curve();
        curve.nodes.truncate(3);
        let ks = Kernel::epanechnikov(1);
        let kt = Kernel::epanechnikov(1);
        let report = choose_alpha_g(
            &main, &curve, &[], 20, &ks, &kt, 0.05, 0.3, &[0.1, 0.2, 0.3], 0.05,
        )
        .unwrap();
        assert_eq!(report.errors, vec![0.0, 0.0, 0.0]);
        // No grid point reaches the d = 1 band (1/3, 1): full-grid fallback.
        assert_eq!(report.chosen_alpha, 0.1);
        assert!(report.no_hits());
        // With a band member present the flat tie lands on it instead.
        let report = choose_alpha_g(
            &main, &curve, &[], 20, &ks, &kt, 0.05, 0.3, &[0.1, 0.4], 0.05,
        )
        .unwrap();
        assert_eq!(report.chosen_alpha, 0.4);
        // (0.3, 0.4) is the only admissible cell of this grid in d = 1, so
        // the flat tie lands there, not on the smallest exponents.
        let report = choose_alpha_beta_f(
            &main, &curve, &[], 20, &ks, &kt, 0.05, 0.3, &[0.2, 0.3], &[0.1, 0.4], 0.05, 0.2,
        )
        .unwrap();
        assert_eq!(report.chosen_alpha, 0.3);
        assert_eq!(report.chosen_beta, Some(0.4));
        assert_eq!(report.errors.len(), 4);
        // A grid with no admissible cell falls back to the whole grid.
        let report = choose_alpha_beta_f(
            &main, &curve, &[], 20, &ks, &kt, 0.05, 0.3, &[0.2, 0.3], &[0.1], 0.05, 0.2,
        )
        .unwrap();
        assert_eq!(report.chosen_alpha, 0.2);
        assert_eq!(report.chosen_beta, Some(0.1));
    }

    #[test]
    fn split_sizes_and_reindexing() {
        let mut chain = EmbeddedChain::new(1);
        for i in 0..23 {
            chain.push(&[i as f64 / 23.0], 0.1 + i as f64, false);
        }
        let (main, val) = split_chain(&chain);
        assert_eq!(val.len(), 3);
        assert_eq!(main.len(), 20);
        assert_eq!(val.state(0), chain.state(0));
        assert_eq!(main.state(0), chain.state(3));
        assert_eq!(main.interarrival(0), chain.interarrival(3));
    }

    #[test]
    fn direct_error_of_constant_fields() {
        let curve = toy_curve();
        // Speed one over [0, 0.5]: lengths are exact.
        let est = vec![2.0; curve.len()];
        let truth = vec![3.0; curve.len()];
        let got = direct_cv_error(&curve, &est, &truth);
        assert!((got - (4.0 * 0.5 - 2.0 * 6.0 * 0.5)).abs() < 1e-12);
    }
}
