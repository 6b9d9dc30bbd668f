//! Run-and-tumble motion in the unit disc: the cell swims straight at unit
//! speed in its current direction, tumbles to a fresh uniform direction at
//! a position-dependent rate, and is forced to tumble on the wall. State is
//! `(x1, x2, angle)`.

use std::f64::consts::PI;
use std::sync::Arc;

use rand::Rng;
use rand::RngCore;

use crate::error::{PdmpError, Result};
use crate::model::{ExitTime, PdmpModel};
use crate::state::State;

#[derive(Clone)]
pub struct BacteriaModel {
    rate_field: Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>,
    /// Set when the field is constant: unlocks the closed-form clock.
    const_rate: Option<f64>,
}

/// The default tumbling field: constant rate one.
pub fn build_bacteria() -> BacteriaModel {
    BacteriaModel { rate_field: Arc::new(|_, _| 1.0), const_rate: Some(1.0) }
}

impl BacteriaModel {
    pub fn with_constant_rate(rate: f64) -> BacteriaModel {
        assert!(rate >= 0.0 && rate.is_finite());
        BacteriaModel { rate_field: Arc::new(move |_, _| rate), const_rate: Some(rate) }
    }

    pub fn with_rate_field(field: impl Fn(f64, f64) -> f64 + Send + Sync + 'static) -> Self {
        BacteriaModel { rate_field: Arc::new(field), const_rate: None }
    }

    fn exit_along(&self, x: &[f64], direction: f64) -> f64 {
        // |pos + t u|^2 = 1 with u the (signed) swim direction.
        let b = direction * (x[0] * x[2].cos() + x[1] * x[2].sin());
        let r2 = x[0] * x[0] + x[1] * x[1];
        -b + (b * b + 1.0 - r2).max(0.0).sqrt()
    }
}

impl std::fmt::Debug for BacteriaModel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("BacteriaModel").field("const_rate", &self.const_rate).finish()
    }
}

impl PdmpModel for BacteriaModel {
    fn name(&self) -> &'static str {
        "bacteria"
    }

    fn dim(&self) -> usize {
        3
    }

    fn flow(&self, x: &[f64], t: f64) -> Result<State> {
        Ok(State::new(vec![
            x[0] + t * x[2].cos(),
            x[1] + t * x[2].sin(),
            x[2],
        ]))
    }

    fn rate(&self, x: &[f64]) -> Result<f64> {
        let r = (self.rate_field)(x[0], x[1]);
        if r < 0.0 || !r.is_finite() {
            return Err(PdmpError::ModelContract {
                context: format!("tumbling rate {r} at ({}, {})", x[0], x[1]),
            });
        }
        Ok(r)
    }

    /// The open unit disc in position; the angle coordinate is free.
    fn in_domain(&self, x: &[f64]) -> bool {
        x[2].is_finite() && x[0] * x[0] + x[1] * x[1] < 1.0
    }

    fn sample_post_jump(
        &self,
        x: &[f64],
        _boundary: bool,
        rng: &mut dyn RngCore,
    ) -> Result<State> {
        // Tumble: the position stays, the direction resamples uniformly.
        // Positions that drifted onto the wall get nudged inside.
        let mut x1 = x[0];
        let mut x2 = x[1];
        let r = (x1 * x1 + x2 * x2).sqrt();
        if r >= 1.0 - 1e-12 {
            let shrink = (1.0 - 1e-9) / r;
            x1 *= shrink;
            x2 *= shrink;
        }
        let angle = rng.random::<f64>() * 2.0 * PI;
        Ok(State::new(vec![x1, x2, angle]))
    }

    fn analytic_exit_forward(&self, x: &[f64]) -> Option<ExitTime> {
        Some(ExitTime::At(self.exit_along(x, 1.0)))
    }

    fn analytic_exit_backward(&self, x: &[f64]) -> Option<ExitTime> {
        Some(ExitTime::At(self.exit_along(x, -1.0)))
    }

    fn analytic_interarrival(&self, _x: &[f64], level: f64) -> Option<Result<f64>> {
        let rate = self.const_rate?;
        if rate == 0.0 {
            return Some(Ok(f64::INFINITY));
        }
        Some(Ok(level / rate))
    }

    fn rate_bound_along_flow(&self, _x: &[f64], _horizon: f64) -> Option<f64> {
        self.const_rate
    }

    fn flow_velocity(&self, x: &[f64]) -> Option<Vec<f64>> {
        Some(vec![x[2].cos(), x[2].sin(), 0.0])
    }
}

/// The nine reference positions `(i/2, j/2)`, `i, j` in `{-1, 0, 1}`.
pub fn default_targets() -> Vec<[f64; 2]> {
    let mut out = Vec::with_capacity(9);
    for i in [-1.0f64, 0.0, 1.0] {
        for j in [-1.0f64, 0.0, 1.0] {
            out.push([0.5 * i, 0.5 * j]);
        }
    }
    out
}

/// Sixteen swim directions, `pi/8` apart.
pub fn default_angles() -> Vec<f64> {
    (0..16).map(|i| i as f64 * PI / 8.0).collect()
}

/// Aggregates per-direction jump-rate estimates at one position into a
/// single value: their mean over the directions that produced a finite
/// estimate.
pub fn aggregate_bacteria_lambda(per_angle: &[f64]) -> Result<f64> {
    let finite: Vec<f64> = per_angle.iter().copied().filter(|l| l.is_finite()).collect();
    if finite.is_empty() {
        return Err(PdmpError::EstimationImpossible {
            context: "no direction yielded a finite jump-rate estimate".into(),
        });
    }
    Ok(finite.iter().sum::<f64>() / finite.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::SolverSettings;
    use crate::models::semigroup_defect;
    use crate::rng::SeedSequence;
    use crate::simulate::{simulate_chain, JumpMethod};

    #[test]
    fn exit_times_through_the_disc() {
        let m = build_bacteria();
        // From the center the wall is one unit ahead in any direction.
        assert_eq!(m.analytic_exit_forward(&[0.0, 0.0, 0.0]), Some(ExitTime::At(1.0)));
        // Swimming right from (0.5, 0): forward 0.5, backward 1.5.
        let fwd = m.analytic_exit_forward(&[0.5, 0.0, 0.0]).unwrap();
        let back = m.analytic_exit_backward(&[0.5, 0.0, 0.0]).unwrap();
        assert_eq!(fwd, ExitTime::At(0.5));
        assert_eq!(back, ExitTime::At(1.5));
    }

    #[test]
    fn semigroup_holds_at_random_probes() {
        use rand::Rng;
        let m = build_bacteria();
        let mut rng = SeedSequence::new(13).stream(0);
        for _ in 0..100 {
            let x = vec![
                rng.random::<f64>() - 0.5,
                rng.random::<f64>() - 0.5,
                rng.random::<f64>() * 2.0 * PI,
            ];
            let s = rng.random::<f64>() - 0.5;
            let t = rng.random::<f64>() - 0.5;
            assert!(semigroup_defect(&m, &x, s, t).unwrap() <= 1e-9);
        }
    }

    #[test]
    fn chain_stays_in_the_disc_with_wrapped_angles() {
        let m = build_bacteria();
        let s = SolverSettings::default();
        let mut rng = SeedSequence::new(21).stream(0);
        let chain =
            simulate_chain(&m, &s, JumpMethod::Auto, &[0.0, 0.0, 0.0], 2000, &mut rng).unwrap();
        for i in 0..chain.len() {
            let z = chain.state(i);
            assert!(z[0] * z[0] + z[1] * z[1] < 1.0);
            assert!((0.0..2.0 * PI).contains(&z[2]));
        }
        assert!(chain.boundary_fraction() > 0.05);
    }

    #[test]
    fn custom_field_drives_the_generic_clock() {
        let m = BacteriaModel::with_rate_field(|x1, x2| 1.0 + x1 * x1 + x2 * x2);
        assert!(m.analytic_interarrival(&[0.0, 0.0, 0.0], 1.0).is_none());
        assert!((m.rate(&[0.5, 0.5, 0.0]).unwrap() - 1.5).abs() < 1e-15);
        let s = SolverSettings::default();
        let mut rng = SeedSequence::new(22).stream(0);
        let chain =
            simulate_chain(&m, &s, JumpMethod::Auto, &[0.0, 0.0, 0.0], 200, &mut rng).unwrap();
        assert_eq!(chain.len(), 200);
    }

    #[test]
    fn aggregation_ignores_degenerate_directions() {
        let agg = aggregate_bacteria_lambda(&[1.0, 2.0, f64::INFINITY]).unwrap();
        assert!((agg - 1.5).abs() < 1e-15);
        assert!(aggregate_bacteria_lambda(&[f64::INFINITY]).is_err());
        assert!(aggregate_bacteria_lambda(&[]).is_err());
    }
}
