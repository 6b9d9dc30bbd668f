//! The acceptance checklist. Each test prints one verdict line
//! (`ACCEPTANCE <k> <name>: PASS|FAIL`) and fails loudly with the violated
//! conditions; run with `--nocapture` to see the checklist. Scenario tests
//! pin their seeds and are deterministic regressions; the numeric
//! thresholds of criterion 3 were calibrated by independent brute-force
//! runs recorded in `docs/calibration.md`.

use std::time::{Duration, Instant};

use rayon::prelude::*;

use pdmp::diagnostics::{ks_critical, ks_statistic, ks_two_sample, log_log_slope, quantile};
use pdmp::models::{
    build_oracle, build_tcp, generate_crack_histories, paris_flow_euler, paris_flow_rk4,
    CrackParams,
};
use pdmp::{
    batch_eval, build_tube, choose_alpha_beta_f, choose_alpha_g, crack_scenario, cv_error_f,
    cv_error_g, default_curve_step, default_exponent_grid, direct_cv_error, evaluate_criterion,
    prepare_crossings, reverse_curve, simulate_chain, simulate_main_val, tcp_scenario,
    BandwidthSchedule, EstimatorState, FixedBandwidths, JumpMethod, Kernel, KernelShape,
    PipelineSettings, QueryPoint, SeedSequence, SolverSettings,
};

// Frozen before the main build; see docs/calibration.md.
const NU_FINAL_ERROR_THRESHOLD: f64 = 0.070;
const G_RATIO_FINAL_ERROR_THRESHOLD: f64 = 0.040;

/// Collects violations of one criterion, then prints the verdict line and
/// panics if anything was violated (including the runtime budget).
struct Check {
    index: usize,
    name: &'static str,
    start: Instant,
    budget: Duration,
    violations: Vec<String>,
}

impl Check {
    fn new(index: usize, name: &'static str, budget_secs: u64) -> Self {
        Check {
            index,
            name,
            start: Instant::now(),
            budget: Duration::from_secs(budget_secs),
            violations: Vec::new(),
        }
    }

    fn is(&mut self, cond: bool, msg: String) {
        if !cond {
            self.violations.push(msg);
        }
    }

    fn finish(mut self) {
        let elapsed = self.start.elapsed();
        if elapsed > self.budget {
            self.violations.push(format!(
                "runtime {:.1}s exceeds the {:.0}s budget",
                elapsed.as_secs_f64(),
                self.budget.as_secs_f64()
            ));
        }
        let verdict = if self.violations.is_empty() { "PASS" } else { "FAIL" };
        println!(
            "ACCEPTANCE {:2} {}: {} ({:.1}s)",
            self.index,
            self.name,
            verdict,
            elapsed.as_secs_f64()
        );
        assert!(
            self.violations.is_empty(),
            "criterion {} ({}) violated:\n  {}",
            self.index,
            self.name,
            self.violations.join("\n  ")
        );
    }
}

fn epanechnikov(dim: usize) -> Kernel {
    Kernel::new(KernelShape::Epanechnikov, dim)
}

fn relative_gap(a: f64, b: f64) -> f64 {
    if a == b {
        return 0.0;
    }
    (a - b).abs() / a.abs().max(b.abs())
}

/// Strictly decreasing sequence.
fn decreasing(xs: &[f64]) -> bool {
    xs.windows(2).all(|w| w[1] < w[0])
}

#[test]
fn criterion_01_exactness() {
    let mut check = Check::new(1, "streaming equals batch", 5);

    let model = build_tcp();
    let settings = SolverSettings::default();
    let mut rng = SeedSequence::new(21).stream(0);
    let chain =
        simulate_chain(&model, &settings, JumpMethod::Auto, &[0.3, 0.6], 1_000, &mut rng)
            .unwrap();

    // 25 queries over a 5 x 5 spatial grid with staggered times.
    let mut queries = Vec::new();
    for i in 0..5 {
        for j in 0..5 {
            let x = vec![0.15 + 0.15 * i as f64, 0.15 + 0.15 * j as f64];
            queries.push(QueryPoint::new(x, 0.08 * i as f64));
        }
    }

    let schedule = BandwidthSchedule::new(0.5, 0.3, 0.5, 0.45);
    let ks = epanechnikov(2);
    let kt = epanechnikov(1);

    // Streaming: one record at a time.
    let mut state =
        EstimatorState::with_queries(ks.clone(), kt.clone(), schedule, queries.clone()).unwrap();
    for k in 0..chain.len() {
        state.accumulate_record(chain.state(k), chain.interarrival(k));
    }
    // Batch: the independent closed-form-per-query path.
    let batch = batch_eval(&chain, &ks, &kt, schedule, &queries).unwrap();

    for (idx, b) in batch.iter().enumerate() {
        let s = state.estimates(idx).unwrap();
        for (name, lhs, rhs) in [
            ("f", s.f_hat, b.f_hat),
            ("g", s.g_hat, b.g_hat),
            ("nu", s.nu_hat, b.nu_hat),
        ] {
            check.is(
                relative_gap(lhs, rhs) <= 1e-12,
                format!("query {idx}: {name} streaming {lhs} vs batch {rhs}"),
            );
        }
        check.is(b.nu_hat >= 0.0, format!("query {idx}: negative density {}", b.nu_hat));
    }
    check.finish();
}

#[test]
fn criterion_02_simulation_law() {
    let mut check = Check::new(2, "interarrival law of the constant-rate oracle", 10);

    let model = build_oracle(1, 1.0, false);
    let settings = SolverSettings::default();
    let n = 10_000;
    let seq = SeedSequence::new(22);

    // Numerical hazard inversion, despite the closed form being available.
    let inv = simulate_chain(
        &model,
        &settings,
        JumpMethod::Inversion,
        &[0.3],
        n,
        &mut seq.stream(0),
    )
    .unwrap();
    let thin = simulate_chain(
        &model,
        &settings,
        JumpMethod::Thinning,
        &[0.3],
        n,
        &mut seq.stream(1),
    )
    .unwrap();

    let exp_cdf = |t: f64| 1.0 - (-t).exp();
    let d_inv = ks_statistic(inv.interarrivals(), exp_cdf);
    let crit = ks_critical(n, 0.01);
    check.is(
        d_inv <= crit,
        format!("inversion sample KS {d_inv:.5} above the 1% critical value {crit:.5}"),
    );

    let d_two = ks_two_sample(inv.interarrivals(), thin.interarrivals());
    check.is(
        d_two < 0.02,
        format!("inversion vs thinning KS distance {d_two:.5} is not below 0.02"),
    );
    check.finish();
}

#[test]
fn criterion_03_oracle_convergence() {
    let mut check = Check::new(3, "oracle convergence under calibrated thresholds", 60);

    // The exact calibration setting: unit-speed flow on (0, 1), rate 1,
    // Beta(2, 2) kernel, v0 = 0.4, alpha = 0.2, queries at t = 0.05.
    let model = build_oracle(1, 1.0, true);
    let settings = SolverSettings::default();
    let mut rng = SeedSequence::new(104).stream(0);

    let queries: Vec<QueryPoint> =
        (1..=9).map(|i| QueryPoint::new(vec![i as f64 * 0.1], 0.05)).collect();
    let schedule = BandwidthSchedule::new(0.4, 0.2, 0.4, 0.45);
    let mut state =
        EstimatorState::with_queries(epanechnikov(1), epanechnikov(1), schedule, queries.clone())
            .unwrap();

    let chain =
        simulate_chain(&model, &settings, JumpMethod::Auto, &[0.5], 20_000, &mut rng).unwrap();

    let survival_true = (-0.05f64).exp();
    let mut nu_err = Vec::new();
    let mut g_err = Vec::new();
    for k in 0..chain.len() {
        state.accumulate_record(chain.state(k), chain.interarrival(k));
        if [5_000, 10_000, 20_000].contains(&(k + 1)) {
            let mut worst_nu = 0.0f64;
            let mut worst_g = 0.0f64;
            for (idx, q) in queries.iter().enumerate() {
                let e = state.estimates(idx).unwrap();
                let x = q.x[0];
                let nu_true = 6.0 * x * (1.0 - x);
                worst_nu = worst_nu.max((e.nu_hat - nu_true).abs());
                worst_g = worst_g.max((e.g_hat / e.nu_hat - survival_true).abs());
            }
            nu_err.push(worst_nu);
            g_err.push(worst_g);
        }
    }

    check.is(
        decreasing(&nu_err),
        format!("max |nu_hat - nu| not decreasing over the checkpoints: {nu_err:?}"),
    );
    check.is(
        decreasing(&g_err),
        format!("max |G_hat/nu_hat - exp(-t)| not decreasing: {g_err:?}"),
    );
    check.is(
        nu_err[2] < NU_FINAL_ERROR_THRESHOLD,
        format!("final density error {} above {NU_FINAL_ERROR_THRESHOLD}", nu_err[2]),
    );
    check.is(
        g_err[2] < G_RATIO_FINAL_ERROR_THRESHOLD,
        format!("final survival-ratio error {} above {G_RATIO_FINAL_ERROR_THRESHOLD}", g_err[2]),
    );
    check.finish();
}

#[test]
fn criterion_04_tcp_scenario() {
    let mut check = Check::new(4, "throughput scenario at scale", 900);

    let s = PipelineSettings::default();
    let target = [0.75, 0.5];
    let mut lambdas = Vec::new();
    let mut xi_in_band = 0usize;
    let replicates = 20;
    for r in 0..replicates {
        let report = tcp_scenario(&s, 10_000, 1_000, 400 + r as u64, &target).unwrap();
        lambdas.push(report.estimate.lambda.value());
        let xi1 = report.selection.best_node().xi[0];
        if (0.5..=0.6).contains(&xi1) {
            xi_in_band += 1;
        }
    }

    let finite: Vec<f64> = lambdas.iter().copied().filter(|l| l.is_finite()).collect();
    check.is(
        finite.len() == replicates,
        format!("{} of {replicates} replicates degenerated", replicates - finite.len()),
    );
    let median = quantile(&finite, 0.5);
    check.is(
        (median - 1.25).abs() <= 0.25,
        format!("median jump-rate estimate {median:.4} outside 1.25 +- 20%"),
    );
    check.is(
        xi_in_band * 10 >= replicates * 7,
        format!("first selected coordinate in [0.5, 0.6] in only {xi_in_band}/{replicates} runs"),
    );
    check.finish();
}

/// Criteria 5 and 6 share one throughput run with a fixed seed.
#[test]
fn criteria_05_06_cv_geometry() {
    let mut check5 = Check::new(5, "survival exponent stable in the tube radius", 600);

    let model = build_tcp();
    let s = PipelineSettings::default();
    let (main, val) = simulate_main_val(
        &model,
        &s.solver,
        JumpMethod::Auto,
        &[0.3, 0.6],
        10_000,
        1_000,
        560,
    )
    .unwrap();
    let target = [0.75, 0.5];
    let step =
        default_curve_step(&model, &s.solver, &target, s.curve_cap, s.min_curve_nodes).unwrap();
    let curve = reverse_curve(&model, &s.solver, &target, step, s.curve_cap).unwrap();
    let tube = build_tube(&model, &s.solver, &curve, s.rho).unwrap();
    // The crossing scan is radius-free: one pass serves every rho.
    let crossings =
        prepare_crossings(&model, &s.solver, &tube, &val, 2.0 * curve.horizon).unwrap();

    let ks = epanechnikov(2);
    let kt = epanechnikov(1);
    let grid = default_exponent_grid();
    let mut chosen_idx = Vec::new();
    for rho in [0.005, 0.01, 0.02] {
        let report = choose_alpha_g(
            &main, &curve, &crossings, val.len(), &ks, &kt, s.v0, s.w0, &grid, rho,
        )
        .unwrap();
        let idx = grid.iter().position(|&a| a == report.chosen_alpha).unwrap();
        chosen_idx.push(idx as i64);
    }
    let spread = chosen_idx.iter().max().unwrap() - chosen_idx.iter().min().unwrap();
    check5.is(
        spread <= 1,
        format!("chosen alpha indices {chosen_idx:?} differ by more than one grid step"),
    );
    check5.finish();

    let mut check6 = Check::new(6, "density criterion flatter in beta than alpha", 600);
    let report = choose_alpha_beta_f(
        &main,
        &curve,
        &crossings,
        val.len(),
        &ks,
        &kt,
        s.v0,
        s.w0,
        &grid,
        &grid,
        s.rho2,
        s.rho2,
    )
    .unwrap();
    let betas = report.betas.as_deref().unwrap();
    let i_star = grid.iter().position(|&a| a == report.chosen_alpha).unwrap();
    let j_star = betas.iter().position(|&b| Some(b) == report.chosen_beta).unwrap();
    let at = |i: usize, j: usize| report.errors[i * betas.len() + j];
    let range = |values: Vec<f64>| {
        values.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
            - values.iter().cloned().fold(f64::INFINITY, f64::min)
    };
    let beta_range = range((0..betas.len()).map(|j| at(i_star, j)).collect());
    let alpha_range = range((0..grid.len()).map(|i| at(i, j_star)).collect());
    check6.is(
        beta_range < alpha_range,
        format!(
            "criterion range over beta {beta_range:.6} not below range over alpha {alpha_range:.6}"
        ),
    );
    check6.finish();
}

#[test]
fn criterion_07_bacteria_scenario() {
    let mut check = Check::new(7, "swim scenario recovers the flat rate", 1800);

    let mut s = PipelineSettings::default();
    s.fixed =
        Some(FixedBandwidths { alpha_g: 0.3, alpha_f: 0.3, beta_f: 0.45 });
    let reports = pdmp::bacteria_scenario(&s, 50_000, 77).unwrap();

    check.is(reports.len() == 9, format!("{} targets instead of 9", reports.len()));
    for t in &reports {
        check.is(
            (0.7..=1.3).contains(&t.aggregate),
            format!(
                "aggregate at ({:.1}, {:.1}) is {:.4}, outside [0.7, 1.3]",
                t.target[0], t.target[1], t.aggregate
            ),
        );
    }
    check.finish();
}

#[test]
fn criterion_08_variance_rate() {
    let mut check = Check::new(8, "variance contraction rate of the density sums", 1200);

    // One-dimensional unbounded oracle: records are i.i.d., the variance of
    // F_hat contracts at n^-(1 - alpha d - beta) exactly.
    let model = build_oracle(1, 1.0, false);
    let settings = SolverSettings::default();
    let (alpha, beta) = (0.3, 0.45);
    let schedule = BandwidthSchedule::new(0.4, alpha, 0.4, beta);
    let ns = [2_500usize, 5_000, 10_000, 20_000];
    let replicates = 30;

    let mut variances = Vec::new();
    for (ni, &n) in ns.iter().enumerate() {
        let mut values = Vec::with_capacity(replicates);
        for r in 0..replicates {
            let mut rng = SeedSequence::new(88).stream((ni * 100 + r) as u64);
            let chain =
                simulate_chain(&model, &settings, JumpMethod::Auto, &[0.4], n, &mut rng).unwrap();
            let mut state = EstimatorState::with_queries(
                epanechnikov(1),
                epanechnikov(1),
                schedule,
                vec![QueryPoint::new(vec![0.4], 0.3)],
            )
            .unwrap();
            state.accumulate_chain(&chain);
            values.push(state.estimates(0).unwrap().f_hat);
        }
        let mean = values.iter().sum::<f64>() / values.len() as f64;
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>()
            / (values.len() - 1) as f64;
        variances.push(var);
    }

    let ns_f: Vec<f64> = ns.iter().map(|&n| n as f64).collect();
    let slope = log_log_slope(&ns_f, &variances);
    let expected = -(1.0 - alpha - beta);
    check.is(
        (slope - expected).abs() <= 0.3,
        format!("log-log variance slope {slope:.3} not within 0.3 of {expected:.3}"),
    );
    check.finish();
}

#[test]
fn criterion_09_cv_consistency() {
    let mut check = Check::new(9, "empirical criterion approaches the direct one", 600);

    // On the line, every crossing record sits exactly on the reverse curve,
    // so both gaps are pure Monte Carlo noise: the survival one contracts
    // with n_val and the density one with the shrinking time window.
    let model = build_oracle(1, 1.0, true);
    let s = SolverSettings::default();
    let seq = SeedSequence::new(99);
    let main = simulate_chain(&model, &s, JumpMethod::Auto, &[0.4], 4_000, &mut seq.stream(0))
        .unwrap();

    let target = [0.5];
    let step = default_curve_step(&model, &s, &target, 1.0, 100).unwrap();
    // The disc geometry needs only the curve base, so the tube comes from a
    // coarse curve (cheap crossing scans) while quadrature and queries use
    // a curve fine enough to resolve the spikes of the steepest-exponent
    // estimates; a coarse trapezoid would freeze a quadrature floor into
    // the direct criterion that the rungs cannot shrink.
    let coarse = reverse_curve(&model, &s, &target, step, 1.0).unwrap();
    let tube = build_tube(&model, &s, &coarse, 0.04).unwrap();
    let curve = reverse_curve(&model, &s, &target, step / 8.0, 1.0).unwrap();

    let ks = epanechnikov(1);
    let kt = epanechnikov(1);
    // Generous prefactors keep the late recursive bandwidths from turning
    // the estimates into spike fields at the steep end of the grid, which
    // would leave the cross-term draws heavy-tailed at every rung.
    let (v0, w0) = (0.6, 0.6);
    let grid = default_exponent_grid();
    let beta = 0.45;
    let rungs = [(1_000usize, 0.04f64), (4_000, 0.02), (16_000, 0.01)];
    // A single draw of the empirical criterion is noisy and the density
    // cross term is heavy-tailed at the steepest exponents, so the gap is
    // summarized by its median over independent validation draws and the
    // median must contract.
    let replicates = 96usize;

    // Direct criteria, one pair per grid exponent, fixed by the main chain.
    let mut direct = Vec::new();
    for &alpha in &grid {
        let schedule = BandwidthSchedule::new(v0, alpha, w0, beta);
        let evals = evaluate_criterion(&main, &ks, &kt, schedule, &curve.nodes).unwrap();
        let kappa_hat: Vec<f64> = evals.iter().map(|e| e.kappa).collect();
        let kappa_true: Vec<f64> =
            curve.nodes.iter().map(|n| model.kappa(&n.xi, n.tau)).collect();

        let queries: Vec<QueryPoint> =
            curve.nodes.iter().map(|n| QueryPoint::new(n.xi.clone(), n.tau)).collect();
        let f_hat: Vec<f64> = batch_eval(&main, &ks, &kt, schedule, &queries)
            .unwrap()
            .iter()
            .map(|e| e.f_hat)
            .collect();
        let f_true: Vec<f64> = curve
            .nodes
            .iter()
            .map(|n| model.invariant_density(&n.xi) * model.interarrival_density(&n.xi, n.tau))
            .collect();
        direct.push((
            direct_cv_error(&curve, &kappa_hat, &kappa_true),
            direct_cv_error(&curve, &f_hat, &f_true),
        ));
    }

    let draws: Vec<(Vec<Vec<f64>>, Vec<Vec<f64>>)> = (0..replicates)
        .into_par_iter()
        .map(|r| {
            let mut gap_g = vec![vec![0.0; rungs.len()]; grid.len()];
            let mut gap_f = vec![vec![0.0; rungs.len()]; grid.len()];
            for (i, &(n_val, rho)) in rungs.iter().enumerate() {
                let val = simulate_chain(
                    &model,
                    &s,
                    JumpMethod::Auto,
                    &[0.4],
                    n_val,
                    &mut seq.stream(1 + (r * rungs.len() + i) as u64),
                )
                .unwrap();
                let crossings =
                    prepare_crossings(&model, &s, &tube, &val, 2.0 * curve.horizon).unwrap();
                for (a, &alpha) in grid.iter().enumerate() {
                    let schedule = BandwidthSchedule::new(v0, alpha, w0, beta);
                    let (err_g, _) =
                        cv_error_g(&main, &curve, &crossings, n_val, &ks, &kt, schedule, rho)
                            .unwrap();
                    gap_g[a][i] = (err_g - direct[a].0).abs();
                    let (err_f, _) =
                        cv_error_f(&main, &curve, &crossings, n_val, &ks, &kt, schedule, rho, rho)
                            .unwrap();
                    gap_f[a][i] = (err_f - direct[a].1).abs();
                }
            }
            (gap_g, gap_f)
        })
        .collect();

    for (a, &alpha) in grid.iter().enumerate() {
        let med = |pick: &dyn Fn(&(Vec<Vec<f64>>, Vec<Vec<f64>>)) -> &Vec<Vec<f64>>| -> Vec<f64> {
            (0..rungs.len())
                .map(|i| {
                    let sample: Vec<f64> = draws.iter().map(|d| pick(d)[a][i]).collect();
                    quantile(&sample, 0.5)
                })
                .collect()
        };
        let gap_g = med(&|d| &d.0);
        let gap_f = med(&|d| &d.1);
        check.is(
            decreasing(&gap_g),
            format!("survival-criterion median gaps not decreasing at alpha {alpha}: {gap_g:?}"),
        );
        check.is(
            decreasing(&gap_f),
            format!("density-criterion median gaps not decreasing at alpha {alpha}: {gap_f:?}"),
        );
    }
    check.finish();
}

#[test]
fn criterion_10_crack_pipeline() {
    let mut check = Check::new(10, "crack pipeline recovers the increasing switch rate", 600);

    let params = CrackParams::default();
    let mut rng = SeedSequence::new(1003).stream(0);
    let records = generate_crack_histories(&params, 800, &mut rng).unwrap();

    let mut m_grid = Vec::new();
    let step = 0.04;
    let mut m = params.m_band.0 + step;
    while m < params.m_band.1 - 0.5 * step {
        m_grid.push(m);
        m += step;
    }

    let mut s = PipelineSettings::default();
    s.v0 = 0.1;
    s.w0 = 0.25;
    s.fixed = Some(FixedBandwidths { alpha_g: 0.3, alpha_f: 0.3, beta_f: 0.45 });
    let targets = [25.0, 30.0, 35.0, 40.0, 45.0];
    let reports = crack_scenario(&params, &records, &targets, &m_grid, &s).unwrap();

    let lambdas: Vec<f64> = reports.iter().map(|t| t.estimate.lambda.value()).collect();
    let m_stars: Vec<f64> = reports.iter().map(|t| t.m_star).collect();
    check.is(
        lambdas.iter().all(|l| l.is_finite() && *l > 0.0),
        format!("degenerate switch-rate estimates: {lambdas:?}"),
    );
    let inversions = lambdas.windows(2).filter(|w| w[1] < w[0]).count();
    check.is(
        inversions <= 1,
        format!("{inversions} inversions in the recovered rates {lambdas:?}"),
    );
    check.is(
        m_stars.windows(2).all(|w| w[1] >= w[0]),
        format!("selected material parameter not nondecreasing: {m_stars:?}"),
    );
    check.finish();
}

#[test]
fn criterion_11_rk4_order() {
    let mut check = Check::new(11, "fourth-order contraction of the growth integrator", 5);

    let params = CrackParams::default();
    let m = 3.0;
    let c = params.noiseless_c(m);
    // Deep into the accelerating regime, where a coarse step is genuinely
    // pre-asymptotic and the fourth-order contraction is measurable.
    let cycles = 250_000.0;

    // A fine Euler reference, then two coarse fourth-order steps.
    let reference = paris_flow_euler(&params, params.a0, m, c, cycles, 1.0).unwrap();
    let coarse = paris_flow_rk4(&params, params.a0, m, c, cycles, cycles / 4.0).unwrap();
    let halved = paris_flow_rk4(&params, params.a0, m, c, cycles, cycles / 8.0).unwrap();

    let e_coarse = (coarse - reference).abs();
    let e_halved = (halved - reference).abs();
    check.is(
        e_halved > 0.0,
        format!("halved-step error {e_halved:e} vanishes; the probe is too fine"),
    );
    let factor = e_coarse / e_halved;
    check.is(
        (8.0..=32.0).contains(&factor),
        format!(
            "halving the step shrank the error by {factor:.2}, outside [8, 32] \
             (reference {reference:.6} mm, errors {e_coarse:.3e} / {e_halved:.3e})"
        ),
    );
    check.finish();
}
