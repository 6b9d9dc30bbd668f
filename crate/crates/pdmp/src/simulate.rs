//! Exact simulation of the embedded jump chain.
//!
//! Each record of the embedded chain is a post-jump state `Z_i` together
//! with the following interarrival time `S_{i+1}` and a flag marking whether
//! that jump was forced by the domain boundary. The initial state counts as
//! record 0. Interarrival times come from hazard inversion by default;
//! models with a closed-form hazard override it, and thinning is available
//! as an opt-in cross-check for models that provide a rate bound.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::ops::Range;
use std::path::Path;

use rand::{Rng, RngCore};
use rand_distr::Exp1;

use crate::error::{PdmpError, Result};
use crate::model::{exit_time_forward, ExitTime, PdmpModel, SolverSettings};
use crate::numeric::adaptive_simpson;
use crate::state::State;

/// How interarrival times are drawn.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum JumpMethod {
    /// Closed-form hazard inversion when the model has one, numerical
    /// inversion otherwise.
    #[default]
    Auto,
    /// Force numerical hazard inversion even when a closed form exists.
    Inversion,
    /// Thinning against `rate_bound_along_flow`; errors if the model does
    /// not provide a bound.
    Thinning,
}

/// Outcome of integrating the hazard along the flow up to a cap.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum HazardInversion {
    /// The integrated hazard reached the level at this time.
    Jump(f64),
    /// The cap was reached first; `integral` is the hazard accumulated.
    Exhausted { t: f64, integral: f64 },
}

/// Solves `int_0^t rate(Phi(x, s)) ds = level` for `t`, integrating
/// segment by segment with doubling steps and bisecting inside the
/// bracketing segment. `t_max` caps the search (the solver horizon applies
/// when `None`).
pub fn invert_hazard_level(
    model: &dyn PdmpModel,
    settings: &SolverSettings,
    x: &[f64],
    level: f64,
    t_max: Option<f64>,
) -> Result<HazardInversion> {
    if level <= 0.0 {
        return Ok(HazardInversion::Jump(0.0));
    }
    let cap = t_max.unwrap_or(settings.exit_horizon);
    let f = |t: f64| -> Result<f64> {
        let y = model.flow(x, t)?;
        let r = model.rate(&y)?;
        if r < 0.0 {
            return Err(PdmpError::ModelContract {
                context: format!("negative jump rate {r} along the flow"),
            });
        }
        Ok(r)
    };

    let mut t_cur = 0.0;
    let mut acc = 0.0;
    let mut h = settings.initial_step;
    loop {
        let t_next = (t_cur + h).min(cap);
        let seg = adaptive_simpson(&f, t_cur, t_next, settings.quad_tol)?;
        if acc + seg >= level {
            // Bisect inside [t_cur, t_next], carrying the left integral to
            // keep each quadrature short.
            let mut lo = t_cur;
            let mut hi = t_next;
            let mut acc_lo = acc;
            while hi - lo > settings.exit_tol {
                let mid = 0.5 * (lo + hi);
                let part = adaptive_simpson(&f, lo, mid, settings.quad_tol)?;
                if acc_lo + part >= level {
                    hi = mid;
                } else {
                    lo = mid;
                    acc_lo += part;
                }
            }
            return Ok(HazardInversion::Jump(0.5 * (lo + hi)));
        }
        acc += seg;
        t_cur = t_next;
        if t_cur >= cap {
            return Ok(HazardInversion::Exhausted { t: cap, integral: acc });
        }
        h *= 2.0;
    }
}

/// Draws one interarrival time from state `x`: the jump-rate clock capped
/// by the forced jump at the domain exit. Returns `(s, boundary)`.
pub fn sample_interjump(
    model: &dyn PdmpModel,
    settings: &SolverSettings,
    method: JumpMethod,
    x: &[f64],
    rng: &mut dyn RngCore,
) -> Result<(f64, bool)> {
    let exit = exit_time_forward(model, settings, x)?;
    sample_interjump_with_exit(model, settings, method, x, exit, rng)
}

/// As [`sample_interjump`], with the exit time already solved.
pub fn sample_interjump_with_exit(
    model: &dyn PdmpModel,
    settings: &SolverSettings,
    method: JumpMethod,
    x: &[f64],
    exit: ExitTime,
    rng: &mut dyn RngCore,
) -> Result<(f64, bool)> {
    let level: f64 = rng.sample(Exp1);
    let cap = match exit {
        ExitTime::At(t) => t,
        ExitTime::Never => settings.exit_horizon,
    };

    let hit = match method {
        JumpMethod::Auto => match model.analytic_interarrival(x, level) {
            Some(t) => {
                let t = t?;
                if t < cap {
                    HazardInversion::Jump(t)
                } else {
                    HazardInversion::Exhausted { t: cap, integral: f64::NAN }
                }
            }
            None => invert_hazard_level(model, settings, x, level, Some(cap))?,
        },
        JumpMethod::Inversion => invert_hazard_level(model, settings, x, level, Some(cap))?,
        JumpMethod::Thinning => thin_interjump(model, settings, x, cap, rng)?,
    };

    match hit {
        HazardInversion::Jump(s) => Ok((s, false)),
        HazardInversion::Exhausted { t, .. } => {
            if exit.is_finite() {
                Ok((t, true))
            } else {
                Err(PdmpError::HazardExhausted {
                    context: format!(
                        "no jump within the horizon {} on an unbounded flow",
                        settings.exit_horizon
                    ),
                })
            }
        }
    }
}

fn thin_interjump(
    model: &dyn PdmpModel,
    _settings: &SolverSettings,
    x: &[f64],
    cap: f64,
    rng: &mut dyn RngCore,
) -> Result<HazardInversion> {
    let bound = model
        .rate_bound_along_flow(x, cap)
        .ok_or_else(|| PdmpError::ModelContract {
            context: format!("model `{}` provides no rate bound for thinning", model.name()),
        })?;
    if bound < 0.0 || !bound.is_finite() {
        return Err(PdmpError::ModelContract {
            context: format!("invalid thinning bound {bound}"),
        });
    }
    if bound == 0.0 {
        return Ok(HazardInversion::Exhausted { t: cap, integral: 0.0 });
    }
    let mut t = 0.0;
    loop {
        let e: f64 = rng.sample(Exp1);
        t += e / bound;
        if t >= cap {
            return Ok(HazardInversion::Exhausted { t: cap, integral: f64::NAN });
        }
        let y = model.flow(x, t)?;
        let r = model.rate(&y)?;
        if r > bound * (1.0 + 1e-9) {
            return Err(PdmpError::ModelContract {
                context: format!("rate {r} exceeds the declared thinning bound {bound}"),
            });
        }
        if rng.random::<f64>() * bound < r {
            return Ok(HazardInversion::Jump(t));
        }
    }
}

/// The embedded chain `(Z_i, S_{i+1})`, stored record-major with flat
/// state storage so the estimator inner loops stream contiguously.
#[derive(Clone, Debug, PartialEq)]
pub struct EmbeddedChain {
    dim: usize,
    states: Vec<f64>,
    interarrivals: Vec<f64>,
    boundary: Vec<bool>,
}

impl EmbeddedChain {
    pub fn new(dim: usize) -> Self {
        EmbeddedChain::with_capacity(dim, 0)
    }

    pub fn with_capacity(dim: usize, n: usize) -> Self {
        assert!(dim >= 1);
        EmbeddedChain {
            dim,
            states: Vec::with_capacity(n * dim),
            interarrivals: Vec::with_capacity(n),
            boundary: Vec::with_capacity(n),
        }
    }

    pub fn push(&mut self, state: &[f64], interarrival: f64, boundary: bool) {
        assert_eq!(state.len(), self.dim);
        self.states.extend_from_slice(state);
        self.interarrivals.push(interarrival);
        self.boundary.push(boundary);
    }

    pub fn len(&self) -> usize {
        self.interarrivals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.interarrivals.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn state(&self, i: usize) -> &[f64] {
        &self.states[i * self.dim..(i + 1) * self.dim]
    }

    #[inline]
    pub fn interarrival(&self, i: usize) -> f64 {
        self.interarrivals[i]
    }

    #[inline]
    pub fn is_boundary(&self, i: usize) -> bool {
        self.boundary[i]
    }

    pub fn interarrivals(&self) -> &[f64] {
        &self.interarrivals
    }

    pub fn boundary_fraction(&self) -> f64 {
        if self.is_empty() {
            return 0.0;
        }
        self.boundary.iter().filter(|&&b| b).count() as f64 / self.len() as f64
    }

    /// Copies a contiguous block of records into a fresh chain. The copy is
    /// re-indexed from zero, which is what the recursive bandwidths of a
    /// validation chain expect.
    pub fn sub_chain(&self, range: Range<usize>) -> EmbeddedChain {
        let mut out = EmbeddedChain::with_capacity(self.dim, range.len());
        for i in range {
            out.push(self.state(i), self.interarrival(i), self.is_boundary(i));
        }
        out
    }

    /// Writes `idx,z_1..z_d,s,boundary` rows. Floats use the shortest
    /// round-trip decimal form.
    pub fn write_csv(&self, w: &mut dyn Write) -> Result<()> {
        write!(w, "idx")?;
        for j in 1..=self.dim {
            write!(w, ",z_{j}")?;
        }
        writeln!(w, ",s,boundary")?;
        for i in 0..self.len() {
            write!(w, "{i}")?;
            for &z in self.state(i) {
                write!(w, ",{z}")?;
            }
            writeln!(
                w,
                ",{},{}",
                self.interarrival(i),
                if self.is_boundary(i) { 1 } else { 0 }
            )?;
        }
        Ok(())
    }

    pub fn to_csv_file(&self, path: &Path) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        self.write_csv(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn read_csv(r: &mut dyn BufRead) -> Result<EmbeddedChain> {
        let mut lines = r.lines();
        let header = lines
            .next()
            .ok_or_else(|| PdmpError::Parse {
                line: 1,
                context: "empty chain file".into(),
            })?
            .map_err(PdmpError::Io)?;
        let cols: Vec<&str> = header.trim().split(',').collect();
        if cols.len() < 4 || cols[0] != "idx" || cols[cols.len() - 2] != "s" {
            return Err(PdmpError::Parse {
                line: 1,
                context: format!("unexpected chain header `{header}`"),
            });
        }
        let dim = cols.len() - 3;
        let mut chain = EmbeddedChain::new(dim);
        let mut state = vec![0.0; dim];
        for (lineno, line) in lines.enumerate() {
            let line = line.map_err(PdmpError::Io)?;
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let mut fields = line.split(',');
            let bad = |what: &str| PdmpError::Parse {
                line: lineno + 2,
                context: format!("{what} in `{line}`"),
            };
            fields.next().ok_or_else(|| bad("missing idx"))?;
            for slot in state.iter_mut() {
                *slot = fields
                    .next()
                    .and_then(|f| f.trim().parse().ok())
                    .ok_or_else(|| bad("bad state coordinate"))?;
            }
            let s: f64 = fields
                .next()
                .and_then(|f| f.trim().parse().ok())
                .ok_or_else(|| bad("bad interarrival"))?;
            let boundary = match fields.next().map(str::trim) {
                Some("0") | Some("false") => false,
                Some("1") | Some("true") => true,
                _ => return Err(bad("bad boundary flag")),
            };
            if fields.next().is_some() {
                return Err(bad("trailing fields"));
            }
            chain.push(&state, s, boundary);
        }
        Ok(chain)
    }

    pub fn from_csv_file(path: &Path) -> Result<EmbeddedChain> {
        let mut r = BufReader::new(File::open(path)?);
        EmbeddedChain::read_csv(&mut r)
    }
}

/// Simulates `n` records of the embedded chain started at `x0` (which is
/// itself record 0). Any per-step failure is wrapped with the step index.
pub fn simulate_chain(
    model: &dyn PdmpModel,
    settings: &SolverSettings,
    method: JumpMethod,
    x0: &[f64],
    n: usize,
    rng: &mut dyn RngCore,
) -> Result<EmbeddedChain> {
    let d = model.dim();
    if x0.len() != d {
        return Err(PdmpError::DimensionMismatch { expected: d, got: x0.len() });
    }
    if !model.in_domain(x0) {
        return Err(PdmpError::OutsideDomain {
            context: format!("initial state {x0:?} of model `{}`", model.name()),
        });
    }
    let mut chain = EmbeddedChain::with_capacity(d, n);
    let mut z = x0.to_vec();
    for i in 0..n {
        let (s, boundary, next) = step_once(model, settings, method, &z, rng)
            .map_err(|e| PdmpError::Simulation { index: i, source: Box::new(e) })?;
        chain.push(&z, s, boundary);
        z.copy_from_slice(&next);
    }
    Ok(chain)
}

fn step_once(
    model: &dyn PdmpModel,
    settings: &SolverSettings,
    method: JumpMethod,
    z: &[f64],
    rng: &mut dyn RngCore,
) -> Result<(f64, bool, State)> {
    let exit = exit_time_forward(model, settings, z)?;
    let (s, boundary) = sample_interjump_with_exit(model, settings, method, z, exit, rng)?;
    let pre_jump = model.flow(z, s)?;
    let next = model.sample_post_jump(&pre_jump, boundary, rng)?;
    if next.dim() != model.dim() {
        return Err(PdmpError::DimensionMismatch { expected: model.dim(), got: next.dim() });
    }
    if !next.is_finite() || !model.in_domain(&next) {
        return Err(PdmpError::ModelContract {
            context: format!("post-jump state {next:?} left the domain of `{}`", model.name()),
        });
    }
    Ok((s, boundary, next))
}
