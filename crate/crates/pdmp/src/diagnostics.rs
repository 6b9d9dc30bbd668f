//! Distributional checks and summary statistics used by the validation
//! suites: Kolmogorov-Smirnov distances, quantiles, and log-log rate fits.

/// One-sample Kolmogorov-Smirnov statistic of `sample` against the
/// continuous CDF `cdf`.
pub fn ks_statistic(sample: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    assert!(!sample.is_empty());
    let mut xs = sample.to_vec();
    xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = xs.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &x) in xs.iter().enumerate() {
        let f = cdf(x);
        d = d.max(f - i as f64 / n).max((i + 1) as f64 / n - f);
    }
    d
}

/// Two-sample Kolmogorov-Smirnov statistic.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> f64 {
    assert!(!a.is_empty() && !b.is_empty());
    let mut xs = a.to_vec();
    let mut ys = b.to_vec();
    xs.sort_by(|p, q| p.partial_cmp(q).unwrap());
    ys.sort_by(|p, q| p.partial_cmp(q).unwrap());
    let (m, n) = (xs.len() as f64, ys.len() as f64);
    let (mut i, mut j) = (0usize, 0usize);
    let mut d: f64 = 0.0;
    while i < xs.len() && j < ys.len() {
        // Advance both samples past the current value so ties are
        // compared after, not inside, the jump.
        let x = xs[i].min(ys[j]);
        while i < xs.len() && xs[i] == x {
            i += 1;
        }
        while j < ys.len() && ys[j] == x {
            j += 1;
        }
        d = d.max((i as f64 / m - j as f64 / n).abs());
    }
    d
}

/// Asymptotic Kolmogorov-Smirnov coefficient `c(level)` with
/// `P(sqrt(n) D_n > c) = level`. Only tabulated levels are supported.
pub fn ks_coefficient(level: f64) -> Option<f64> {
    const TABLE: [(f64, f64); 4] = [(0.10, 1.224), (0.05, 1.358), (0.02, 1.517), (0.01, 1.628)];
    TABLE
        .iter()
        .find(|(l, _)| (l - level).abs() < 1e-9)
        .map(|&(_, c)| c)
}

/// One-sample critical value `c(level) / sqrt(n)`.
pub fn ks_critical(n: usize, level: f64) -> f64 {
    ks_coefficient(level).expect("unsupported KS level") / (n as f64).sqrt()
}

/// Two-sample critical value `c(level) sqrt((m + n) / (m n))`.
pub fn ks_critical_two_sample(m: usize, n: usize, level: f64) -> f64 {
    let (m, n) = (m as f64, n as f64);
    ks_coefficient(level).expect("unsupported KS level") * ((m + n) / (m * n)).sqrt()
}

/// Linearly interpolated quantile (the convention used by most numerical
/// packages): `q` in `[0, 1]`.
pub fn quantile(sample: &[f64], q: f64) -> f64 {
    assert!(!sample.is_empty());
    assert!((0.0..=1.0).contains(&q));
    let mut xs = sample.to_vec();
    xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let pos = q * (xs.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    if lo == hi {
        xs[lo]
    } else {
        xs[lo] + (pos - lo as f64) * (xs[hi] - xs[lo])
    }
}

pub fn median(sample: &[f64]) -> f64 {
    quantile(sample, 0.5)
}

pub fn interquartile_range(sample: &[f64]) -> f64 {
    quantile(sample, 0.75) - quantile(sample, 0.25)
}

pub fn mean(sample: &[f64]) -> f64 {
    assert!(!sample.is_empty());
    sample.iter().sum::<f64>() / sample.len() as f64
}

/// Unbiased sample variance.
pub fn variance(sample: &[f64]) -> f64 {
    assert!(sample.len() >= 2);
    let m = mean(sample);
    sample.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (sample.len() - 1) as f64
}

/// Least-squares `(slope, intercept)` of `y` on `x`.
pub fn linear_fit(x: &[f64], y: &[f64]) -> (f64, f64) {
    assert_eq!(x.len(), y.len());
    assert!(x.len() >= 2);
    let mx = mean(x);
    let my = mean(y);
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for (xi, yi) in x.iter().zip(y) {
        sxx += (xi - mx) * (xi - mx);
        sxy += (xi - mx) * (yi - my);
    }
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}

/// Slope of `ln y` against `ln x`; the empirical polynomial rate of decay.
pub fn log_log_slope(x: &[f64], y: &[f64]) -> f64 {
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    linear_fit(&lx, &ly).0
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ks_of_a_perfect_grid() {
        let n = 100;
        let sample: Vec<f64> = (0..n).map(|i| (i as f64 + 0.5) / n as f64).collect();
        let d = ks_statistic(&sample, |x| x.clamp(0.0, 1.0));
        assert!((d - 0.5 / n as f64).abs() < 1e-12);
    }

    #[test]
    fn ks_two_sample_of_shifted_grids() {
        let a: Vec<f64> = (0..50).map(|i| i as f64).collect();
        let b: Vec<f64> = (0..50).map(|i| i as f64 + 25.0).collect();
        let d = ks_two_sample(&a, &b);
        assert!((d - 0.5).abs() < 1e-12);
    }

    #[test]
    fn critical_values() {
        assert!((ks_critical(10_000, 0.01) - 0.01628).abs() < 1e-12);
        assert!((ks_critical_two_sample(100, 100, 0.05) - 1.358 * (0.02f64).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn quantiles_interpolate() {
        let xs = [4.0, 1.0, 3.0, 2.0];
        assert!((median(&xs) - 2.5).abs() < 1e-12);
        assert!((quantile(&xs, 0.25) - 1.75).abs() < 1e-12);
        assert!((interquartile_range(&xs) - 1.5).abs() < 1e-12);
    }

    #[test]
    fn log_log_slope_of_a_power_law() {
        let x = [1.0f64, 2.0, 4.0, 8.0];
        let y: Vec<f64> = x.iter().map(|&v| 3.0 * v.powi(-2)).collect();
        assert!((log_log_slope(&x, &y) + 2.0).abs() < 1e-12);
    }
}
