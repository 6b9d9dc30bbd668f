//! Smoothing kernels and recursive bandwidth schedules.
//!
//! Spatial smoothing uses a product kernel on `R^d`; interarrival smoothing
//! uses the matching one-dimensional kernel. Bandwidths decay polynomially in
//! the record index, which is what makes the estimators recursive: a new
//! record updates the running sums without touching earlier terms.

use serde::{Deserialize, Serialize};

use crate::error::{PdmpError, Result};

/// Base shape shared by every coordinate of a product kernel.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelShape {
    /// `u -> 0.75 (1 - u^2)` on `[-1, 1]`.
    Epanechnikov,
    /// `u -> 1/2` on `[-1, 1]`.
    Uniform,
}

impl KernelShape {
    fn eval_1d(self, u: f64) -> f64 {
        match self {
            KernelShape::Epanechnikov => 0.75 * (1.0 - u * u),
            KernelShape::Uniform => 0.5,
        }
    }
}

/// A product kernel `K(u) = prod_j k(u_j)` with compact support `[-1,1]^d`.
#[derive(Clone, Debug)]
pub struct Kernel {
    shape: KernelShape,
    dim: usize,
    l2_sq: f64,
}

impl Kernel {
    pub fn new(shape: KernelShape, dim: usize) -> Self {
        assert!(dim >= 1, "kernel dimension must be positive");
        let l2_1d = l2_sq_1d(shape);
        Kernel {
            shape,
            dim,
            l2_sq: l2_1d.powi(dim as i32),
        }
    }

    pub fn epanechnikov(dim: usize) -> Self {
        Kernel::new(KernelShape::Epanechnikov, dim)
    }

    pub fn uniform(dim: usize) -> Self {
        Kernel::new(KernelShape::Uniform, dim)
    }

    pub fn shape(&self) -> KernelShape {
        self.shape
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Stable identifier used in snapshots, e.g. `"epanechnikov:2"`.
    pub fn name(&self) -> String {
        let base = match self.shape {
            KernelShape::Epanechnikov => "epanechnikov",
            KernelShape::Uniform => "uniform",
        };
        format!("{}:{}", base, self.dim)
    }

    pub fn from_name(name: &str) -> Result<Self> {
        let (base, dim) = name.split_once(':').ok_or_else(|| PdmpError::Parse {
            line: 0,
            context: format!("kernel name `{name}` is not of the form shape:dim"),
        })?;
        let dim: usize = dim.parse().map_err(|_| PdmpError::Parse {
            line: 0,
            context: format!("kernel dimension `{dim}` is not an integer"),
        })?;
        let shape = match base {
            "epanechnikov" => KernelShape::Epanechnikov,
            "uniform" => KernelShape::Uniform,
            other => {
                return Err(PdmpError::Parse {
                    line: 0,
                    context: format!("unknown kernel shape `{other}`"),
                })
            }
        };
        if dim == 0 {
            return Err(PdmpError::Parse {
                line: 0,
                context: "kernel dimension must be positive".into(),
            });
        }
        Ok(Kernel::new(shape, dim))
    }

    /// Euclidean radius of a ball containing the support `[-1,1]^d`.
    pub fn support_radius(&self) -> f64 {
        (self.dim as f64).sqrt()
    }

    /// `int K(u)^2 du` over `R^d`; for a product kernel this is the 1-d
    /// squared norm raised to the d-th power.
    pub fn l2_sq(&self) -> f64 {
        self.l2_sq
    }

    /// Evaluates `prod_j k(u_j)`, bailing out on the first coordinate
    /// outside the support. The early exit matters: in the estimator inner
    /// loops almost every record misses the query ball.
    #[inline]
    pub fn eval(&self, u: &[f64]) -> f64 {
        debug_assert_eq!(u.len(), self.dim);
        let mut acc = 1.0;
        for &uj in u {
            if uj.abs() >= 1.0 {
                return 0.0;
            }
            acc *= self.shape.eval_1d(uj);
        }
        acc
    }

    /// Evaluates the kernel at componentwise differences `(a_j - b_j) / h`,
    /// without materialising the difference vector.
    #[inline]
    pub fn eval_scaled_diff(&self, a: &[f64], b: &[f64], h_inv: f64) -> f64 {
        debug_assert_eq!(a.len(), self.dim);
        debug_assert_eq!(b.len(), self.dim);
        let mut acc = 1.0;
        for j in 0..self.dim {
            let u = (a[j] - b[j]) * h_inv;
            if u.abs() >= 1.0 {
                return 0.0;
            }
            acc *= self.shape.eval_1d(u);
        }
        acc
    }

    /// One-dimensional convenience for the interarrival kernel.
    #[inline]
    pub fn eval_scalar(&self, u: f64) -> f64 {
        debug_assert_eq!(self.dim, 1);
        if u.abs() >= 1.0 {
            0.0
        } else {
            self.shape.eval_1d(u)
        }
    }
}

/// `int k(u)^2 du` on `[-1,1]` by composite Simpson quadrature.
///
/// Both built-in shapes have closed forms (0.6 and 0.5); quadrature keeps the
/// constant honest if shapes are added, and Simpson on 2^11 panels resolves a
/// quartic integrand far below solver tolerances.
fn l2_sq_1d(shape: KernelShape) -> f64 {
    let n = 2048usize;
    let h = 2.0 / n as f64;
    let f = |u: f64| {
        let k = shape.eval_1d(u);
        k * k
    };
    let mut acc = f(-1.0) + f(1.0);
    for i in 1..n {
        let u = -1.0 + i as f64 * h;
        acc += if i % 2 == 1 { 4.0 * f(u) } else { 2.0 * f(u) };
    }
    acc * h / 3.0
}

/// Decay parameters `(v0, alpha, w0, beta)`: record `k` (0-based) is
/// smoothed with `v_k = v0 (k+1)^-alpha` in space and `w_k = w0 (k+1)^-beta`
/// in time.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BandwidthSchedule {
    pub v0: f64,
    pub alpha: f64,
    pub w0: f64,
    pub beta: f64,
}

impl BandwidthSchedule {
    pub fn new(v0: f64, alpha: f64, w0: f64, beta: f64) -> Self {
        BandwidthSchedule { v0, alpha, w0, beta }
    }

    #[inline]
    pub fn v(&self, k: usize) -> f64 {
        self.v0 * ((k + 1) as f64).powf(-self.alpha)
    }

    #[inline]
    pub fn w(&self, k: usize) -> f64 {
        self.w0 * ((k + 1) as f64).powf(-self.beta)
    }

    pub fn is_admissible(&self, d: usize) -> bool {
        admissible(self.alpha, self.beta, d)
    }
}

/// Full admissibility of `(alpha, beta)` in dimension `d`: positive decays,
/// total smoothing `alpha d + beta` below 1, and enough decay on the slower
/// axis for the variance term to dominate the bias.
pub fn admissible(alpha: f64, beta: f64, d: usize) -> bool {
    let d = d as f64;
    alpha > 0.0
        && beta > 0.0
        && alpha * d + beta < 1.0
        && alpha * d + beta + 2.0 * alpha.min(beta) > 1.0
}

/// Admissibility band for the spatial-only estimators (no time kernel):
/// `alpha d < 1` and `alpha (d + 2) > 1`.
pub fn admissible_g(alpha: f64, d: usize) -> bool {
    let d = d as f64;
    alpha * d < 1.0 && alpha * (d + 2.0) > 1.0
}

/// Per-record bandwidth factors for one schedule, precomputed so parameter
/// sweeps pay the `powf` cost once per record instead of once per
/// record-query pair.
#[derive(Clone, Debug)]
pub struct BandwidthTable {
    pub v: Vec<f64>,
    pub w: Vec<f64>,
    pub v_inv: Vec<f64>,
    pub w_inv: Vec<f64>,
    /// `v_k^{-d}`, the spatial normalisation of record `k`.
    pub v_inv_d: Vec<f64>,
}

impl BandwidthTable {
    pub fn new(schedule: &BandwidthSchedule, n: usize, d: usize) -> Self {
        let mut v = Vec::with_capacity(n);
        let mut w = Vec::with_capacity(n);
        let mut v_inv = Vec::with_capacity(n);
        let mut w_inv = Vec::with_capacity(n);
        let mut v_inv_d = Vec::with_capacity(n);
        for k in 0..n {
            let vk = schedule.v(k);
            let wk = schedule.w(k);
            v.push(vk);
            w.push(wk);
            v_inv.push(1.0 / vk);
            w_inv.push(1.0 / wk);
            v_inv_d.push(vk.powi(-(d as i32)));
        }
        BandwidthTable { v, w, v_inv, w_inv, v_inv_d }
    }

    pub fn len(&self) -> usize {
        self.v.len()
    }

    pub fn is_empty(&self) -> bool {
        self.v.is_empty()
    }
}

/// Feasibility of initial bandwidths at a query `(x, t)`.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct BandwidthFeasibility {
    pub feasible: bool,
    /// Infimum of the exit time over the probe mesh, after any safety shrink.
    pub inf_exit: f64,
    /// `t + w0 * delta`, the largest time the smoothing window can reach.
    pub required: f64,
    pub margin: f64,
}

/// Checks that the smoothing window around `(x, t)` stays strictly inside
/// the deterministic exit horizon: `t + w0 delta` must stay below the
/// infimum of the exit time over the ball `B(x, v0 delta)`.
///
/// The ball infimum is probed on a finite mesh (center, axis points on the
/// sphere, full- and half-radius cube corners). `exit_time` returns `None`
/// for states that never reach the boundary; states outside the domain
/// should be mapped to `Some(0.0)` by the caller, which is conservative.
/// When the exit times come from a numerical solver rather than a closed
/// form, set `exact = false` and the probed infimum is shrunk by 5% to
/// absorb mesh and solver error.
pub fn check_initial_bandwidths(
    exit_time: impl Fn(&[f64]) -> Option<f64>,
    exact: bool,
    x: &[f64],
    t: f64,
    v0: f64,
    w0: f64,
    delta: f64,
) -> BandwidthFeasibility {
    let d = x.len();
    let r = v0 * delta;
    let mut inf = exit_time(x).unwrap_or(f64::INFINITY);

    let mut probe = |y: &[f64]| {
        let e = exit_time(y).unwrap_or(f64::INFINITY);
        if e < inf {
            inf = e;
        }
    };

    let mut y = x.to_vec();
    for j in 0..d {
        for sign in [-1.0, 1.0] {
            y.copy_from_slice(x);
            y[j] += sign * r;
            probe(&y);
        }
    }
    // Cube corners on the sphere of radius r and at half radius.
    let corner_step = r / (d as f64).sqrt();
    for scale in [1.0, 0.5] {
        for mask in 0..(1u32 << d) {
            for j in 0..d {
                let sign = if mask >> j & 1 == 1 { 1.0 } else { -1.0 };
                y[j] = x[j] + sign * scale * corner_step;
            }
            probe(&y);
        }
    }

    let inf_exit = if exact { inf } else { 0.95 * inf };
    let required = t + w0 * delta;
    BandwidthFeasibility {
        feasible: required < inf_exit,
        inf_exit,
        required,
        margin: inf_exit - required,
    }
}
