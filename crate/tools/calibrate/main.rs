//! Brute-force calibration of the oracle-convergence thresholds.
//!
//! Dependency-free reference implementation, deliberately independent of the
//! library crate: own RNG (SplitMix64), rejection sampling for Beta(2,2),
//! and direct evaluation of the defining estimator sums
//!
//!   nu_n(x)   = (1/n) sum_{i<n} v_i^{-1} K((Z_i - x)/v_i)
//!   G_n(x,t)  = (1/n) sum_{i<n} v_i^{-1} K((Z_i - x)/v_i) 1{S_{i+1} > t}
//!
//! with v_i = v0 (i+1)^{-alpha}, K the Epanechnikov kernel, on the constant-rate
//! i.i.d.-kernel oracle: Z_0 = 0.5 fixed, Z_i ~ Beta(2,2) for i >= 1,
//! S_{i+1} ~ Exp(1). True values: nu(x) = 6x(1-x), G(x,t)/nu(x) = exp(-t).
//!
//! Build and run:
//!   rustc --edition=2021 -O tools/calibrate/main.rs -o /tmp/calibrate && /tmp/calibrate
//!
//! Outputs, per run and per n in {5000, 10000, 20000}: the maximum absolute
//! errors over the 9-point grid x in {0.1, ..., 0.9}. Thresholds are frozen in
//! docs/calibration.md as 1.5x the worst run at n = 20000.

struct SplitMix64(u64);

impl SplitMix64 {
    fn next_u64(&mut self) -> u64 {
        self.0 = self.0.wrapping_add(0x9e3779b97f4a7c15);
        let mut z = self.0;
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
        z ^ (z >> 31)
    }

    fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / 9007199254740992.0)
    }

    /// Beta(2,2) by rejection: density 6u(1-u) <= 1.5 on (0,1).
    fn beta22(&mut self) -> f64 {
        loop {
            let u = self.uniform();
            let v = self.uniform();
            if 1.5 * v <= 6.0 * u * (1.0 - u) {
                return u;
            }
        }
    }

    fn exp1(&mut self) -> f64 {
        -(1.0 - self.uniform()).ln()
    }
}

fn epanechnikov(u: f64) -> f64 {
    if u.abs() <= 1.0 {
        0.75 * (1.0 - u * u)
    } else {
        0.0
    }
}

/// Simulates one oracle chain of length max(checkpoints) and returns the
/// per-checkpoint maximum errors (nu, G/nu) over the grid.
fn run_chain(
    seed: u64,
    v0: f64,
    alpha: f64,
    t_query: f64,
    grid: &[f64],
    checkpoints: &[usize],
) -> (Vec<f64>, Vec<f64>) {
    let mut rng = SplitMix64(seed);
    let mut nu_sum = vec![0.0f64; grid.len()];
    let mut g_sum = vec![0.0f64; grid.len()];
    let mut z = 0.5; // initial state of the chain
    let mut count = 0usize;
    let mut nus = Vec::new();
    let mut gs = Vec::new();
    for &n in checkpoints {
        while count < n {
            let i = count;
            let s = rng.exp1().min(1.0 - z); // boundary jump at t+ = 1 - z
            let v = v0 * ((i + 1) as f64).powf(-alpha);
            for (j, &x) in grid.iter().enumerate() {
                let k = epanechnikov((z - x) / v) / v;
                nu_sum[j] += k;
                if s > t_query {
                    g_sum[j] += k;
                }
            }
            z = rng.beta22();
            count += 1;
        }
        let mut max_nu = 0.0f64;
        let mut max_g = 0.0f64;
        for (j, &x) in grid.iter().enumerate() {
            let nu_hat = nu_sum[j] / count as f64;
            let g_hat = g_sum[j] / count as f64;
            let q = 6.0 * x * (1.0 - x);
            max_nu = max_nu.max((nu_hat - q).abs());
            let ratio = if nu_hat == 0.0 { 0.0 } else { g_hat / nu_hat };
            max_g = max_g.max((ratio - (-t_query).exp()).abs());
        }
        nus.push(max_nu);
        gs.push(max_g);
    }
    (nus, gs)
}

fn main() {
    let v0 = 0.4;
    let alpha = 0.2;
    let t_query = 0.05;
    let grid: Vec<f64> = (1..=9).map(|k| k as f64 / 10.0).collect();
    let checkpoints = [5000usize, 10000, 20000];
    let n_max = *checkpoints.last().unwrap();

    println!("v0={v0} alpha={alpha} t={t_query} grid 0.1..0.9 (9 points)");
    println!("run  n      max|nu-q|     max|G/nu-exp(-t)|");

    // Trend reliability at the frozen settings: fraction of seeds with
    // strictly decreasing max errors (context for the fixed-seed regression).
    let trend_seeds = 40u64;
    let mut mono_both = 0usize;
    for seed in 1..=trend_seeds {
        let (nus, gs) = run_chain(seed, v0, alpha, t_query, &grid, &checkpoints);
        if nus[0] > nus[1] && nus[1] > nus[2] && gs[0] > gs[1] && gs[1] > gs[2] {
            mono_both += 1;
        }
    }
    println!("strictly-decreasing both metrics: {mono_both}/{trend_seeds} seeds");
    println!();

    let mut worst_nu: f64 = 0.0;
    let mut worst_g: f64 = 0.0;
    for (run, seed) in [101u64, 202, 303].into_iter().enumerate() {
        let (nus, gs) = run_chain(seed, v0, alpha, t_query, &grid, &checkpoints);
        for (k, &n) in checkpoints.iter().enumerate() {
            println!("{:<4} {:<6} {:<13.6} {:<13.6}", run + 1, n, nus[k], gs[k]);
            if n == n_max {
                worst_nu = worst_nu.max(nus[k]);
                worst_g = worst_g.max(gs[k]);
            }
        }
    }
    println!();
    println!("worst at n={n_max}: nu {worst_nu:.6}  g-ratio {worst_g:.6}");
    println!(
        "thresholds (1.5x margin): NU {:.6}  G_RATIO {:.6}",
        1.5 * worst_nu,
        1.5 * worst_g
    );
}
