//! Fatigue crack growth in a finite plate under cyclic load. Between regime
//! switches the crack length follows the Paris law
//! `da/dN = C dK(a)^m` with the finite-width correction
//! `dK(a) = dsigma sqrt(pi a) / sqrt(cos(pi a / omega))`; the switch to the
//! accelerated (Forman) regime happens at a length-dependent rate.
//!
//! Estimation works in parameter space: each specimen contributes one
//! record `(m, S)` with `S` the switch time reconstructed in megacycles,
//! and the curve of a target length `a` is indexed by the material
//! parameter `m` through the deterministic time `tau_m(a)`.

use std::collections::BTreeMap;
use std::io::Read;

use rand::distr::Distribution;
use rand::Rng;
use rand::RngCore;
use rand_distr::{Exp1, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{PdmpError, Result};
use crate::flow_geometry::CurveNode;
use crate::model::{ExitTime, PdmpModel};
use crate::numeric::adaptive_simpson;
use crate::simulate::EmbeddedChain;
use crate::state::State;

/// Geometry, load and material-law constants. Lengths are in millimetres,
/// stresses in MPa (so `dK` is in MPa sqrt(mm)) and times in megacycles.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CrackParams {
    /// Stress range of the load cycle.
    pub delta_sigma: f64,
    /// Plate width; the stress intensity diverges at `omega / 2`.
    pub omega: f64,
    /// Load ratio, used by the post-switch Forman law.
    pub r_ratio: f64,
    /// Initial crack length.
    pub a0: f64,
    /// Fracture toughness of the Forman law.
    pub kc: f64,
    /// `ln C = intercept + slope m` (natural logarithm), the fitted
    /// dependence of the Paris constant on the exponent.
    pub lnc_intercept: f64,
    pub lnc_slope: f64,
    /// Specimen scatter around the fitted line, as the standard deviation
    /// of an additive noise on `ln C`.
    pub noise_sd: f64,
    /// Law of the material parameter across specimens: a normal truncated
    /// to the band.
    pub m_mean: f64,
    pub m_sd: f64,
    pub m_band: (f64, f64),
    /// Largest length the test rig observes; histories still growing there
    /// are censored. Must stay below `omega / 2`.
    pub a_limit: f64,
    /// Switch intensity `lambda(a) = lambda0 + lambda1 (a - onset)^+` per
    /// megacycle, used by the synthetic generator. The onset sits past the
    /// early lengths so the hazard mass lands where the stress intensity
    /// is already high.
    pub lambda0: f64,
    pub lambda1: f64,
    pub a_hazard_onset: f64,
}

impl Default for CrackParams {
    fn default() -> Self {
        CrackParams {
            delta_sigma: 48.28,
            omega: 152.0,
            r_ratio: 0.2,
            a0: 9.0,
            kc: 1e4,
            lnc_intercept: -9.25,
            lnc_slope: -5.89,
            noise_sd: 0.0,
            m_mean: 3.0,
            m_sd: 0.3,
            m_band: (2.6, 3.4),
            a_limit: 60.0,
            lambda0: 0.3,
            lambda1: 2.0,
            a_hazard_onset: 20.0,
        }
    }
}

impl CrackParams {
    /// The Paris constant on the fitted line, without specimen noise.
    pub fn noiseless_c(&self, m: f64) -> f64 {
        (self.lnc_intercept + self.lnc_slope * m).exp()
    }

    /// The generator's switch intensity at length `a`, per megacycle.
    pub fn switch_rate(&self, a: f64) -> f64 {
        self.lambda0 + self.lambda1 * (a - self.a_hazard_onset).max(0.0)
    }
}

/// Stress intensity range at crack length `a` (finite for `a < omega / 2`).
pub fn delta_k(params: &CrackParams, a: f64) -> f64 {
    let sec = 1.0 / (std::f64::consts::PI * a / params.omega).cos();
    params.delta_sigma * (std::f64::consts::PI * a).sqrt() * sec.sqrt()
}

/// Paris growth rate in mm per cycle.
pub fn paris_rate(params: &CrackParams, a: f64, m: f64, c: f64) -> f64 {
    c * delta_k(params, a).powf(m)
}

/// Growth speed in mm per megacycle.
fn speed_mega(params: &CrackParams, a: f64, m: f64, c: f64) -> f64 {
    1e6 * paris_rate(params, a, m, c)
}

fn check_below_limit(params: &CrackParams, a: f64) -> Result<()> {
    if a >= 0.5 * params.omega {
        return Err(PdmpError::NumericalFlow {
            t: a,
            context: format!(
                "crack length {a} mm reached the tensile instability at omega/2 = {} mm",
                0.5 * params.omega
            ),
        });
    }
    Ok(())
}

fn integrate_growth(
    rate: impl Fn(f64) -> Result<f64>,
    a_start: f64,
    n_cycles: f64,
    step_cycles: f64,
    rk4: bool,
) -> Result<f64> {
    assert!(step_cycles > 0.0 && n_cycles >= 0.0);
    let steps = (n_cycles / step_cycles).ceil().max(1.0) as usize;
    let h = n_cycles / steps as f64;
    let mut a = a_start;
    for _ in 0..steps {
        if rk4 {
            let k1 = rate(a)?;
            let k2 = rate(a + 0.5 * h * k1)?;
            let k3 = rate(a + 0.5 * h * k2)?;
            let k4 = rate(a + h * k3)?;
            a += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        } else {
            a += h * rate(a)?;
        }
    }
    Ok(a)
}

/// Integrates the Paris law for `n_cycles` cycles with the classical
/// Runge-Kutta scheme at the given step. Errors when the crack reaches the
/// tensile instability.
pub fn paris_flow_rk4(
    params: &CrackParams,
    a_start: f64,
    m: f64,
    c: f64,
    n_cycles: f64,
    step_cycles: f64,
) -> Result<f64> {
    check_below_limit(params, a_start)?;
    let rate = |a: f64| -> Result<f64> {
        check_below_limit(params, a)?;
        Ok(paris_rate(params, a, m, c))
    };
    integrate_growth(rate, a_start, n_cycles, step_cycles, true)
}

/// The same integration with the explicit Euler scheme; the reference the
/// convergence-order checks compare against at a very fine step.
pub fn paris_flow_euler(
    params: &CrackParams,
    a_start: f64,
    m: f64,
    c: f64,
    n_cycles: f64,
    step_cycles: f64,
) -> Result<f64> {
    check_below_limit(params, a_start)?;
    let rate = |a: f64| -> Result<f64> {
        check_below_limit(params, a)?;
        Ok(paris_rate(params, a, m, c))
    };
    integrate_growth(rate, a_start, n_cycles, step_cycles, false)
}

/// Post-switch Forman rate `C dK^m / ((1 - R) Kc - dK)`, valid while the
/// denominator stays positive.
pub fn forman_rate(params: &CrackParams, a: f64, m: f64, c: f64) -> Result<f64> {
    check_below_limit(params, a)?;
    let dk = delta_k(params, a);
    let den = (1.0 - params.r_ratio) * params.kc - dk;
    if den <= 0.0 {
        return Err(PdmpError::NumericalFlow {
            t: a,
            context: format!("Forman denominator vanished at a = {a} mm (dK = {dk})"),
        });
    }
    Ok(c * dk.powf(m) / den)
}

/// Integrates the Forman law (visualisation of the post-switch regime).
pub fn forman_flow_rk4(
    params: &CrackParams,
    a_start: f64,
    m: f64,
    c: f64,
    n_cycles: f64,
    step_cycles: f64,
) -> Result<f64> {
    integrate_growth(
        |a| forman_rate(params, a, m, c),
        a_start,
        n_cycles,
        step_cycles,
        true,
    )
}

/// The deterministic time, in megacycles, for a specimen with parameters
/// `(m, c)` to grow from `a0` to `a_target`.
pub fn time_to_length(params: &CrackParams, m: f64, c: f64, a_target: f64) -> Result<f64> {
    if a_target < params.a0 {
        return Err(PdmpError::Config {
            context: format!("target length {a_target} mm is below a0 = {} mm", params.a0),
        });
    }
    check_below_limit(params, a_target)?;
    if c <= 0.0 || !c.is_finite() {
        return Err(PdmpError::Config { context: format!("invalid Paris constant {c}") });
    }
    adaptive_simpson(
        &|a| Ok(1.0 / speed_mega(params, a, m, c)),
        params.a0,
        a_target,
        1e-10,
    )
}

/// Curve of a target length `a`: one node per grid value of the material
/// parameter, at the deterministic time `tau_m(a)`, ordered by increasing
/// time (decreasing `m`). Node speeds are `|dm / dtau|` along the curve.
pub fn parameter_curve(
    params: &CrackParams,
    a_target: f64,
    m_grid: &[f64],
) -> Result<Vec<CurveNode>> {
    if m_grid.is_empty() {
        return Err(PdmpError::EmptyGrid { context: "material parameter grid is empty".into() });
    }
    let mut pairs = Vec::with_capacity(m_grid.len());
    for &m in m_grid {
        let tau = time_to_length(params, m, params.noiseless_c(m), a_target)?;
        pairs.push((tau, m));
    }
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    let speed_at = |j: usize| -> f64 {
        let (lo, hi) = if pairs.len() == 1 {
            return 0.0;
        } else if j == 0 {
            (0, 1)
        } else if j == pairs.len() - 1 {
            (pairs.len() - 2, pairs.len() - 1)
        } else {
            (j - 1, j + 1)
        };
        let dt = pairs[hi].0 - pairs[lo].0;
        if dt == 0.0 {
            0.0
        } else {
            ((pairs[hi].1 - pairs[lo].1) / dt).abs()
        }
    };
    Ok(pairs
        .iter()
        .enumerate()
        .map(|(j, &(tau, m))| CurveNode { tau, xi: vec![m], speed: speed_at(j) })
        .collect())
}

/// One synthetic or ingested specimen: its fitted Paris exponent and the
/// crack length at which the regime switched.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SwitchRecord {
    pub history_id: u32,
    pub m: f64,
    pub a_switch_mm: f64,
}

/// A raw growth history: cycle counts and lengths.
#[derive(Clone, Debug, PartialEq)]
pub struct CrackHistory {
    pub history_id: u32,
    pub cycles: Vec<f64>,
    pub lengths: Vec<f64>,
}

/// Parsed crack data, one variant per ingestion schema.
#[derive(Clone, Debug, PartialEq)]
pub enum CrackData {
    Switches(Vec<SwitchRecord>),
    Curves(Vec<CrackHistory>),
}

/// Draws synthetic specimens: a truncated-normal material parameter, the
/// fitted (optionally noisy) Paris constant, and a switch length from the
/// intensity `switch_rate`. Specimens still growing at `a_limit` come out
/// censored, with the switch length pinned at the limit.
pub fn generate_crack_histories(
    params: &CrackParams,
    count: usize,
    rng: &mut dyn RngCore,
) -> Result<Vec<SwitchRecord>> {
    let m_law = Normal::new(params.m_mean, params.m_sd).map_err(|e| PdmpError::Config {
        context: format!("invalid material-parameter law: {e}"),
    })?;
    let noise = if params.noise_sd > 0.0 {
        Some(Normal::new(0.0, params.noise_sd).expect("positive standard deviation"))
    } else {
        None
    };
    let mut out = Vec::with_capacity(count);
    for i in 0..count {
        let mut m = f64::NAN;
        for _ in 0..1000 {
            let draw = m_law.sample(rng);
            if draw > params.m_band.0 && draw < params.m_band.1 {
                m = draw;
                break;
            }
        }
        if m.is_nan() {
            return Err(PdmpError::Config {
                context: "the material-parameter band rejects essentially every draw".into(),
            });
        }
        let mut ln_c = params.lnc_intercept + params.lnc_slope * m;
        if let Some(noise) = &noise {
            ln_c += noise.sample(rng);
        }
        let c = ln_c.exp();
        let a_switch = sample_switch_length(params, m, c, rng);
        out.push(SwitchRecord { history_id: i as u32, m, a_switch_mm: a_switch });
    }
    Ok(out)
}

/// Inverts the integrated switch hazard in length: walks a fixed grid
/// accumulating `lambda(a) / speed(a) da` and interpolates the crossing.
/// Returns `a_limit` when the hazard never reaches the drawn level: the
/// specimen is censored.
fn sample_switch_length(params: &CrackParams, m: f64, c: f64, rng: &mut dyn RngCore) -> f64 {
    const DA: f64 = 0.05;
    let level: f64 = rng.sample(Exp1);
    let mut a = params.a0;
    let mut acc = 0.0;
    let mut density_lo = params.switch_rate(a) / speed_mega(params, a, m, c);
    while a < params.a_limit {
        let a_next = (a + DA).min(params.a_limit);
        let density_hi = params.switch_rate(a_next) / speed_mega(params, a_next, m, c);
        let seg = 0.5 * (density_lo + density_hi) * (a_next - a);
        if acc + seg >= level {
            // Linear interpolation of the cumulative inside the segment.
            let frac = if seg > 0.0 { (level - acc) / seg } else { 0.5 };
            return a + frac * (a_next - a);
        }
        acc += seg;
        a = a_next;
        density_lo = density_hi;
    }
    params.a_limit
}

/// Builds the estimation chain from switch records: state is the material
/// parameter, the interarrival is the switch time reconstructed through
/// the fitted `ln C(m)` line. Records at the observation limit become
/// boundary records: censoring is the forced jump of the test rig.
pub fn switches_to_chain(params: &CrackParams, records: &[SwitchRecord]) -> Result<EmbeddedChain> {
    let mut chain = EmbeddedChain::new(1);
    for r in records {
        let s = time_to_length(params, r.m, params.noiseless_c(r.m), r.a_switch_mm)?;
        let censored = r.a_switch_mm >= params.a_limit - 1e-9;
        chain.push(&[r.m], s, censored);
    }
    Ok(chain)
}

/// Reads crack data from CSV, auto-detecting the schema by header:
/// `history_id,m,a_switch_mm` for switch records or `history_id,cycle,a_mm`
/// for raw growth curves. Curves must be physically monotone.
pub fn ingest_crack_histories(r: &mut dyn Read) -> Result<CrackData> {
    let mut text = String::new();
    r.read_to_string(&mut text)?;
    let mut lines = text.lines().enumerate();
    let header = match lines.next() {
        Some((_, h)) => h.trim_end_matches('\r').trim(),
        None => {
            return Err(PdmpError::Parse { line: 1, context: "empty crack data file".into() })
        }
    };
    let parse_f64 = |line: usize, field: &str, what: &str| -> Result<f64> {
        field.trim().parse::<f64>().map_err(|_| PdmpError::Parse {
            line,
            context: format!("invalid {what} `{field}`"),
        })
    };
    let parse_id = |line: usize, field: &str| -> Result<u32> {
        field.trim().parse::<u32>().map_err(|_| PdmpError::Parse {
            line,
            context: format!("invalid history id `{field}`"),
        })
    };
    match header {
        "history_id,m,a_switch_mm" => {
            let mut out = Vec::new();
            for (i, raw) in lines {
                let line = i + 1;
                let row = raw.trim_end_matches('\r').trim();
                if row.is_empty() {
                    continue;
                }
                let cols: Vec<&str> = row.split(',').collect();
                if cols.len() != 3 {
                    return Err(PdmpError::Parse {
                        line,
                        context: format!("expected 3 fields, found {}", cols.len()),
                    });
                }
                let id = parse_id(line, cols[0])?;
                let m = parse_f64(line, cols[1], "material parameter")?;
                let a = parse_f64(line, cols[2], "switch length")?;
                if !(m.is_finite() && m > 0.0) {
                    return Err(PdmpError::Parse {
                        line,
                        context: format!("material parameter {m} out of range"),
                    });
                }
                if !(a.is_finite() && a > 0.0) {
                    return Err(PdmpError::Parse {
                        line,
                        context: format!("switch length {a} out of range"),
                    });
                }
                out.push(SwitchRecord { history_id: id, m, a_switch_mm: a });
            }
            Ok(CrackData::Switches(out))
        }
        "history_id,cycle,a_mm" => {
            let mut hist: BTreeMap<u32, CrackHistory> = BTreeMap::new();
            for (i, raw) in lines {
                let line = i + 1;
                let row = raw.trim_end_matches('\r').trim();
                if row.is_empty() {
                    continue;
                }
                let cols: Vec<&str> = row.split(',').collect();
                if cols.len() != 3 {
                    return Err(PdmpError::Parse {
                        line,
                        context: format!("expected 3 fields, found {}", cols.len()),
                    });
                }
                let id = parse_id(line, cols[0])?;
                let cycle = parse_f64(line, cols[1], "cycle count")?;
                let a = parse_f64(line, cols[2], "crack length")?;
                let h = hist.entry(id).or_insert_with(|| CrackHistory {
                    history_id: id,
                    cycles: Vec::new(),
                    lengths: Vec::new(),
                });
                if let Some(&last_cycle) = h.cycles.last() {
                    if cycle <= last_cycle {
                        return Err(PdmpError::Parse {
                            line,
                            context: format!(
                                "cycle count {cycle} does not increase in history {id}"
                            ),
                        });
                    }
                }
                if let Some(&last_a) = h.lengths.last() {
                    if a < last_a {
                        return Err(PdmpError::Parse {
                            line,
                            context: format!(
                                "crack length {a} decreases in history {id}: lengths are monotone"
                            ),
                        });
                    }
                }
                h.cycles.push(cycle);
                h.lengths.push(a);
            }
            Ok(CrackData::Curves(hist.into_values().collect()))
        }
        other => Err(PdmpError::Parse {
            line: 1,
            context: format!(
                "unrecognised crack header `{other}`; expected `history_id,m,a_switch_mm` or `history_id,cycle,a_mm`"
            ),
        }),
    }
}

/// The estimation-side view of the crack process: a one-dimensional state
/// space holding the material parameter, frozen along the flow. Its exit
/// time is the saturation time `tau_m(a_limit)`, which is what the
/// bandwidth feasibility check needs. It is never simulated, and the
/// reverse curve is replaced by [`parameter_curve`].
#[derive(Clone, Copy, Debug)]
pub struct CrackParameterSpace {
    pub params: CrackParams,
}

pub fn build_crack_parameter_space(params: CrackParams) -> CrackParameterSpace {
    CrackParameterSpace { params }
}

impl PdmpModel for CrackParameterSpace {
    fn name(&self) -> &'static str {
        "crack-parameter-space"
    }

    fn dim(&self) -> usize {
        1
    }

    fn flow(&self, x: &[f64], _t: f64) -> Result<State> {
        Ok(State::new(x.to_vec()))
    }

    fn rate(&self, _x: &[f64]) -> Result<f64> {
        Ok(0.0)
    }

    fn in_domain(&self, x: &[f64]) -> bool {
        x[0] > self.params.m_band.0 && x[0] < self.params.m_band.1
    }

    fn sample_post_jump(
        &self,
        _x: &[f64],
        _boundary: bool,
        _rng: &mut dyn RngCore,
    ) -> Result<State> {
        Err(PdmpError::ModelContract {
            context: "the crack parameter space is an estimation view, not a simulator".into(),
        })
    }

    fn analytic_exit_forward(&self, x: &[f64]) -> Option<ExitTime> {
        let c = self.params.noiseless_c(x[0]);
        time_to_length(&self.params, x[0], c, self.params.a_limit)
            .ok()
            .map(ExitTime::At)
    }
}
