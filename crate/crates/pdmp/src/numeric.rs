//! Small numerical routines shared by the solvers and the models.

use crate::error::{PdmpError, Result};

/// Adaptive Simpson quadrature of `f` on `[a, b]` to relative tolerance
/// `rel_tol` (with a small absolute floor so integrals near zero terminate).
pub fn adaptive_simpson(
    f: &dyn Fn(f64) -> Result<f64>,
    a: f64,
    b: f64,
    rel_tol: f64,
) -> Result<f64> {
    if a == b {
        return Ok(0.0);
    }
    let fa = f(a)?;
    let fb = f(b)?;
    let m = 0.5 * (a + b);
    let fm = f(m)?;
    let whole = simpson(a, b, fa, fm, fb);
    simpson_rec(f, a, b, fa, fm, fb, whole, rel_tol, 50)
}

fn simpson(a: f64, b: f64, fa: f64, fm: f64, fb: f64) -> f64 {
    (b - a) / 6.0 * (fa + 4.0 * fm + fb)
}

#[allow(clippy::too_many_arguments)]
fn simpson_rec(
    f: &dyn Fn(f64) -> Result<f64>,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    rel_tol: f64,
    depth: u32,
) -> Result<f64> {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm)?;
    let frm = f(rm)?;
    let left = simpson(a, m, fa, flm, fm);
    let right = simpson(m, b, fm, frm, fb);
    let err = left + right - whole;
    let scale = whole.abs().max(1e-12);
    if depth == 0 {
        return Err(PdmpError::ExitSolver {
            context: format!("quadrature failed to converge on [{a}, {b}]"),
        });
    }
    if err.abs() <= 15.0 * rel_tol * scale {
        // Richardson extrapolation of the two Simpson levels.
        return Ok(left + right + err / 15.0);
    }
    let l = simpson_rec(f, a, m, fa, flm, fm, left, rel_tol, depth - 1)?;
    let r = simpson_rec(f, m, b, fm, frm, fb, right, rel_tol, depth - 1)?;
    Ok(l + r)
}

/// Root of a nondecreasing function `g` on a bracketing interval
/// `[lo, hi]` with `g(lo) <= 0 <= g(hi)`, by bisection to width `tol`.
pub fn bisect_nondecreasing(
    g: &dyn Fn(f64) -> Result<f64>,
    mut lo: f64,
    mut hi: f64,
    tol: f64,
) -> Result<f64> {
    for _ in 0..200 {
        if hi - lo <= tol {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if g(mid)? >= 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Trapezoid rule on an already-sampled grid.
pub fn trapezoid(xs: &[f64], ys: &[f64]) -> f64 {
    debug_assert_eq!(xs.len(), ys.len());
    let mut acc = 0.0;
    for i in 1..xs.len() {
        acc += 0.5 * (ys[i] + ys[i - 1]) * (xs[i] - xs[i - 1]);
    }
    acc
}

/// Volume of the unit ball in `R^k` (`V_0 = 1` by convention), via the
/// recursion `V_k = 2 pi V_{k-2} / k`.
pub fn unit_ball_volume(k: usize) -> f64 {
    match k {
        0 => 1.0,
        1 => 2.0,
        _ => 2.0 * std::f64::consts::PI * unit_ball_volume(k - 2) / k as f64,
    }
}

/// Integrates the autonomous scalar ODE `y' = f(y)` over a time span `t`
/// with `steps` classical Runge-Kutta (RK4) steps.
pub fn rk4_scalar(f: &dyn Fn(f64) -> Result<f64>, y0: f64, t: f64, steps: usize) -> Result<f64> {
    assert!(steps > 0);
    let h = t / steps as f64;
    let mut y = y0;
    for _ in 0..steps {
        let k1 = f(y)?;
        let k2 = f(y + 0.5 * h * k1)?;
        let k3 = f(y + 0.5 * h * k2)?;
        let k4 = f(y + h * k3)?;
        y += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }
    Ok(y)
}

/// Forward Euler for the same ODE; the low-order reference integrator.
pub fn euler_scalar(f: &dyn Fn(f64) -> Result<f64>, y0: f64, t: f64, steps: usize) -> Result<f64> {
    assert!(steps > 0);
    let h = t / steps as f64;
    let mut y = y0;
    for _ in 0..steps {
        y += h * f(y)?;
    }
    Ok(y)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn simpson_matches_closed_forms() {
        let f = |x: f64| Ok(x * x * x - 2.0 * x + 1.0);
        let v = adaptive_simpson(&f, 0.0, 2.0, 1e-12).unwrap();
        assert!((v - 2.0).abs() < 1e-10);

        let g = |x: f64| Ok((-x).exp());
        let v = adaptive_simpson(&g, 0.0, 5.0, 1e-10).unwrap();
        assert!((v - (1.0 - (-5.0f64).exp())).abs() < 1e-9);
    }

    #[test]
    fn bisection_finds_root() {
        let g = |x: f64| Ok(x * x - 2.0);
        let r = bisect_nondecreasing(&g, 0.0, 2.0, 1e-12).unwrap();
        assert!((r - 2f64.sqrt()).abs() < 1e-11);
    }

    #[test]
    fn trapezoid_linear_exact() {
        let xs = [0.0, 0.5, 1.5, 2.0];
        let ys: Vec<f64> = xs.iter().map(|x| 3.0 * x + 1.0).collect();
        assert!((trapezoid(&xs, &ys) - 8.0).abs() < 1e-14);
    }

    #[test]
    fn ball_volumes() {
        use std::f64::consts::PI;
        assert_eq!(unit_ball_volume(0), 1.0);
        assert_eq!(unit_ball_volume(1), 2.0);
        assert!((unit_ball_volume(2) - PI).abs() < 1e-14);
        assert!((unit_ball_volume(3) - 4.0 * PI / 3.0).abs() < 1e-14);
    }

    #[test]
    fn integrators_on_exponential_growth() {
        let f = |y: f64| Ok(y);
        let rk = rk4_scalar(&f, 1.0, 1.0, 64).unwrap();
        assert!((rk - 1f64.exp()).abs() < 1e-8);
        let eu = euler_scalar(&f, 1.0, 1.0, 1_000_000).unwrap();
        assert!((eu - 1f64.exp()).abs() < 1e-5);
        // RK4 at a handful of steps already beats Euler at a million.
        assert!((rk - 1f64.exp()).abs() < (eu - 1f64.exp()).abs());
    }
}
