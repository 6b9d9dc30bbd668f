//! Geometry of the deterministic flow: the reverse curve traced backwards
//! from a target state, line integrals along it, and the hyperplane / disc /
//! tube constructions used by the bandwidth cross-validation.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::error::{PdmpError, Result};
use crate::model::{
    exit_time_backward, exit_time_forward, velocity, ExitTime, PdmpModel, SolverSettings,
};
use crate::state::{dist, dot, norm};

/// One sample of a reverse curve: the state `xi = Phi(x, -tau)` reached by
/// flowing backwards for `tau`, and the flow speed there.
#[derive(Clone, Debug)]
pub struct CurveNode {
    pub tau: f64,
    pub xi: Vec<f64>,
    pub speed: f64,
}

/// The reverse curve of a target `x`: nodes at `tau_j = j h`, truncated one
/// step short of the backward exit so every node stays strictly inside the
/// domain, and capped at a configured horizon.
#[derive(Clone, Debug)]
pub struct ReverseCurve {
    pub base: Vec<f64>,
    pub step: f64,
    /// `min(t_minus(x), cap)`, before the one-step truncation.
    pub horizon: f64,
    pub nodes: Vec<CurveNode>,
}

/// Step size that puts at least `min_nodes` nodes on the curve of `x`.
pub fn default_curve_step(
    model: &dyn PdmpModel,
    settings: &SolverSettings,
    x: &[f64],
    cap: f64,
    min_nodes: usize,
) -> Result<f64> {
    let reach = match exit_time_backward(model, settings, x)? {
        ExitTime::At(t_minus) => t_minus.min(cap),
        ExitTime::Never => cap,
    };
    if reach <= 0.0 || !reach.is_finite() {
        return Err(PdmpError::Geometry {
            context: format!("no backward reach at {x:?} (horizon {reach})"),
        });
    }
    Ok(reach / (min_nodes as f64 + 1.0))
}

/// Traces the reverse curve of `x` with node spacing `step`.
pub fn reverse_curve(
    model: &dyn PdmpModel,
    settings: &SolverSettings,
    x: &[f64],
    step: f64,
    cap: f64,
) -> Result<ReverseCurve> {
    if step <= 0.0 || !step.is_finite() {
        return Err(PdmpError::Geometry {
            context: format!("curve step {step} must be positive"),
        });
    }
    if !model.in_domain(x) {
        return Err(PdmpError::OutsideDomain {
            context: format!("curve target {x:?}"),
        });
    }
    let (reach, horizon) = match exit_time_backward(model, settings, x)? {
        ExitTime::At(t_minus) => ((t_minus - step).min(cap), t_minus.min(cap)),
        ExitTime::Never => (cap, cap),
    };
    let count = if reach < 0.0 { 0 } else { (reach / step + 1e-9).floor() as usize };
    let speed_h = (step * 0.5).min(1e-5);
    let mut nodes = Vec::with_capacity(count + 1);
    for j in 0..=count {
        let tau = j as f64 * step;
        let xi = model.flow(x, -tau)?;
        let v = velocity(model, &xi, speed_h)?;
        nodes.push(CurveNode { tau, xi: xi.0, speed: norm(&v) });
    }
    Ok(ReverseCurve { base: x.to_vec(), step, horizon, nodes })
}

impl ReverseCurve {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Time span covered by the nodes.
    pub fn reach(&self) -> f64 {
        self.nodes.last().map_or(0.0, |n| n.tau)
    }

    /// `int_C f dxi` for `f` sampled at the nodes: trapezoid in `tau`
    /// weighted by the flow speed (the arclength element of the
    /// change-of-variable along the flow).
    pub fn line_integral(&self, values: &[f64]) -> f64 {
        assert_eq!(values.len(), self.nodes.len());
        let mut acc = 0.0;
        for j in 1..self.nodes.len() {
            let a = values[j - 1] * self.nodes[j - 1].speed;
            let b = values[j] * self.nodes[j].speed;
            acc += 0.5 * (a + b) * (self.nodes[j].tau - self.nodes[j - 1].tau);
        }
        acc
    }

    /// Writes `j,tau,xi_1..xi_d,speed` rows.
    pub fn write_csv(&self, w: &mut dyn Write) -> Result<()> {
        write!(w, "j,tau")?;
        for k in 1..=self.base.len() {
            write!(w, ",xi_{k}")?;
        }
        writeln!(w, ",speed")?;
        for (j, n) in self.nodes.iter().enumerate() {
            write!(w, "{j},{}", n.tau)?;
            for &c in &n.xi {
                write!(w, ",{c}")?;
            }
            writeln!(w, ",{}", n.speed)?;
        }
        Ok(())
    }

    pub fn to_csv_file(&self, path: &Path) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        self.write_csv(&mut w)?;
        w.flush()?;
        Ok(())
    }
}

/// The tube `T_{x,rho}`: all states whose forward flow crosses the disc
/// `D_{x,rho}` lying in the hyperplane `H_x` orthogonal to the flow at `x`.
#[derive(Clone, Debug)]
pub struct Tube {
    pub base: Vec<f64>,
    pub rho: f64,
    /// Unit flow direction at the base; `H_x` is its orthogonal complement.
    pub normal: Vec<f64>,
    /// Orthonormal basis of `H_x` (empty when `d = 1`).
    pub frame: Vec<Vec<f64>>,
    /// Deterministic probe points of the disc (center plus half- and
    /// full-radius points along each frame direction).
    pub disc_mesh: Vec<Vec<f64>>,
    /// Forward-flow sampling step of the crossing detector.
    pub scan_step: f64,
    /// False when part of the disc leaves the domain (`rho` too large for
    /// the tube to sit inside `E`).
    pub contained: bool,
}

/// Builds the tube of radius `rho` around the curve, deriving the
/// hyperplane frame from the flow direction at the curve base.
pub fn build_tube(
    model: &dyn PdmpModel,
    _settings: &SolverSettings,
    curve: &ReverseCurve,
    rho: f64,
) -> Result<Tube> {
    if rho <= 0.0 || !rho.is_finite() {
        return Err(PdmpError::Geometry { context: format!("tube radius {rho} must be positive") });
    }
    let d = curve.base.len();
    let speed_h = (curve.step * 0.5).min(1e-5);
    let v = velocity(model, &curve.base, speed_h)?;
    let speed = norm(&v);
    if speed <= 0.0 || !speed.is_finite() {
        return Err(PdmpError::Geometry {
            context: format!("flow is stationary at the tube base {:?}", curve.base),
        });
    }
    let normal: Vec<f64> = v.iter().map(|c| c / speed).collect();

    // Gram-Schmidt of the standard basis against the normal.
    let mut frame: Vec<Vec<f64>> = Vec::with_capacity(d - 1);
    for j in 0..d {
        if frame.len() == d - 1 {
            break;
        }
        let mut cand = vec![0.0; d];
        cand[j] = 1.0;
        let pn = dot(&cand, &normal);
        for k in 0..d {
            cand[k] -= pn * normal[k];
        }
        for b in &frame {
            let pb = dot(&cand, b);
            for k in 0..d {
                cand[k] -= pb * b[k];
            }
        }
        let l = norm(&cand);
        if l > 1e-9 {
            for c in cand.iter_mut() {
                *c /= l;
            }
            frame.push(cand);
        }
    }

    let mut disc_mesh = vec![curve.base.clone()];
    for b in &frame {
        for scale in [0.5 * rho, rho, -0.5 * rho, -rho] {
            let p: Vec<f64> = curve.base.iter().zip(b).map(|(c, e)| c + scale * e).collect();
            disc_mesh.push(p);
        }
    }
    let contained = disc_mesh.iter().all(|p| model.in_domain(p));

    Ok(Tube {
        base: curve.base.clone(),
        rho,
        normal,
        frame,
        disc_mesh,
        scan_step: 0.5 * curve.step,
        contained,
    })
}

/// Where a forward flow meets the hyperplane `H_x`: the crossing time and
/// the distance from the disc center. Radius-independent, so one scan
/// serves every tube radius under consideration.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TubeCrossing {
    pub theta: f64,
    pub dist: f64,
}

/// Finds the first crossing of `H_x` by the forward flow from `xi`, within
/// `max_time` and before the flow leaves the domain. Returns the crossing
/// time and the in-plane distance to the base, or `None` when the flow
/// never reaches the hyperplane.
pub fn disc_crossing(
    model: &dyn PdmpModel,
    settings: &SolverSettings,
    tube: &Tube,
    xi: &[f64],
    max_time: f64,
) -> Result<Option<TubeCrossing>> {
    let signed = |t: f64| -> Result<f64> {
        let y = model.flow(xi, t)?;
        let mut s = 0.0;
        for k in 0..y.len() {
            s += (y[k] - tube.base[k]) * tube.normal[k];
        }
        Ok(s)
    };
    let s0 = match signed(0.0) {
        Ok(s) => s,
        Err(_) => return Ok(None),
    };
    if s0 == 0.0 {
        return Ok(Some(TubeCrossing { theta: 0.0, dist: dist(xi, &tube.base) }));
    }
    // The tube consists of reverse curves inside E: a flow that exits the
    // domain before reaching H_x never crosses the disc.
    let cap = match exit_time_forward(model, settings, xi) {
        Ok(ExitTime::At(t)) => t.min(max_time),
        Ok(ExitTime::Never) => max_time,
        Err(_) => return Ok(None),
    };
    let mut t_prev = 0.0;
    let mut s_prev = s0;
    while t_prev < cap {
        let t = (t_prev + tube.scan_step).min(cap);
        let s = match signed(t) {
            Ok(s) => s,
            Err(_) => return Ok(None),
        };
        if s == 0.0 || (s > 0.0) != (s_prev > 0.0) {
            // Bisect the sign change; the signed distance is continuous.
            let (mut lo, mut hi) = (t_prev, t);
            let lo_positive = s_prev > 0.0;
            let tol = settings.exit_tol * t.max(1.0);
            while hi - lo > tol {
                let mid = 0.5 * (lo + hi);
                let sm = signed(mid)?;
                if sm == 0.0 {
                    lo = mid;
                    hi = mid;
                } else if (sm > 0.0) == lo_positive {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            let theta = 0.5 * (lo + hi);
            let y = model.flow(xi, theta)?;
            return Ok(Some(TubeCrossing { theta, dist: dist(&y, &tube.base) }));
        }
        t_prev = t;
        s_prev = s;
    }
    Ok(None)
}

/// The crossing time `theta_x(xi)` when `xi` lies in the tube: the first
/// disc crossing within `max_time`, accepted only if it lands within the
/// tube radius. `None` also encodes `xi` outside the tube.
pub fn tube_hit(
    model: &dyn PdmpModel,
    settings: &SolverSettings,
    tube: &Tube,
    xi: &[f64],
    max_time: f64,
) -> Result<Option<f64>> {
    Ok(disc_crossing(model, settings, tube, xi, max_time)?
        .filter(|c| c.dist <= tube.rho)
        .map(|c| c.theta))
}
