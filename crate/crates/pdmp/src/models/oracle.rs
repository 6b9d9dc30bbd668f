//! A fully solvable reference process: constant jump rate, a jump kernel
//! free of the pre-jump state, drift along the first axis. Post-jump states
//! are i.i.d., so the invariant law, the survival function and the
//! selection criterion are all in closed form. Calibration thresholds and
//! convergence tests are pinned against this model.

use rand::distr::Distribution;
use rand::RngCore;
use rand_distr::Beta;

use crate::error::{PdmpError, Result};
use crate::model::{ExitTime, PdmpModel};
use crate::state::State;

/// Shape parameters of one Beta coordinate of the jump kernel.
#[derive(Clone, Copy, Debug)]
pub struct BetaSpec {
    pub a: f64,
    pub b: f64,
}

impl BetaSpec {
    pub fn new(a: f64, b: f64) -> Self {
        BetaSpec { a, b }
    }

    /// Density at `u`. Needs an integer first shape, which covers every
    /// kernel used here: `1/B(a, b)` is then the finite product
    /// `prod_{k<a} (b + k) / (a - 1)!`.
    pub fn density(&self, u: f64) -> f64 {
        assert!(
            self.a >= 1.0 && self.a.fract() == 0.0,
            "closed-form Beta density needs an integer first shape, got {}",
            self.a
        );
        if !(0.0..=1.0).contains(&u) {
            return 0.0;
        }
        let a = self.a as usize;
        let mut coeff = 1.0;
        for k in 0..a {
            coeff *= (self.b + k as f64) / if k > 0 { k as f64 } else { 1.0 };
        }
        coeff * u.powi(a as i32 - 1) * (1.0 - u).powf(self.b - 1.0)
    }

    /// Distribution function at `u`, for the `(2, 2)` shape.
    pub fn cdf_2_2(u: f64) -> f64 {
        if u <= 0.0 {
            0.0
        } else if u >= 1.0 {
            1.0
        } else {
            u * u * (3.0 - 2.0 * u)
        }
    }
}

/// The oracle process. `bounded` censors the flow at the right face
/// `x_1 = 1` of the unit cube (forced jumps); unbounded flows drift on all
/// of `R^d` and only the rate clock jumps.
#[derive(Clone, Debug)]
pub struct OracleModel {
    rate: f64,
    coords: Vec<BetaSpec>,
    bounded: bool,
}

/// Oracle with `Beta(2, 2)` coordinates.
pub fn build_oracle(dim: usize, rate: f64, bounded: bool) -> OracleModel {
    assert!(dim >= 1);
    assert!(rate >= 0.0 && rate.is_finite());
    OracleModel { rate, coords: vec![BetaSpec::new(2.0, 2.0); dim], bounded }
}

impl OracleModel {
    pub fn with_coords(rate: f64, coords: Vec<BetaSpec>, bounded: bool) -> OracleModel {
        assert!(!coords.is_empty());
        OracleModel { rate, coords, bounded }
    }

    pub fn rate_value(&self) -> f64 {
        self.rate
    }

    /// The invariant spatial density: post-jump states are i.i.d. draws
    /// from the kernel, so it is the kernel's own product density.
    pub fn invariant_density(&self, x: &[f64]) -> f64 {
        self.coords.iter().zip(x).map(|(c, &u)| c.density(u)).product()
    }

    /// `P(S > t | Z = x)`: exponential survival, censored at the forced
    /// jump when the domain is bounded.
    pub fn survival(&self, x: &[f64], t: f64) -> f64 {
        if self.bounded && t >= 1.0 - x[0] {
            return 0.0;
        }
        (-self.rate * t).exp()
    }

    /// Density part of the interarrival law at `(x, t)`.
    pub fn interarrival_density(&self, x: &[f64], t: f64) -> f64 {
        if t < 0.0 || (self.bounded && t >= 1.0 - x[0]) {
            return 0.0;
        }
        self.rate * (-self.rate * t).exp()
    }

    /// The selection criterion `kappa_x(xi) = nu(xi) P(S > tau | xi)` in
    /// closed form.
    pub fn kappa(&self, xi: &[f64], tau: f64) -> f64 {
        self.invariant_density(xi) * self.survival(xi, tau)
    }
}

impl PdmpModel for OracleModel {
    fn name(&self) -> &'static str {
        "oracle"
    }

    fn dim(&self) -> usize {
        self.coords.len()
    }

    fn flow(&self, x: &[f64], t: f64) -> Result<State> {
        let mut y = x.to_vec();
        y[0] += t;
        Ok(State::new(y))
    }

    fn rate(&self, _x: &[f64]) -> Result<f64> {
        Ok(self.rate)
    }

    fn in_domain(&self, x: &[f64]) -> bool {
        if self.bounded {
            x.iter().all(|&c| c > 0.0 && c < 1.0)
        } else {
            x.iter().all(|c| c.is_finite())
        }
    }

    fn sample_post_jump(
        &self,
        _x: &[f64],
        _boundary: bool,
        rng: &mut dyn RngCore,
    ) -> Result<State> {
        let mut y = Vec::with_capacity(self.coords.len());
        for c in &self.coords {
            let beta = Beta::new(c.a, c.b).map_err(|e| PdmpError::ModelContract {
                context: format!("invalid Beta({}, {}): {e}", c.a, c.b),
            })?;
            y.push(beta.sample(rng).clamp(1e-12, 1.0 - 1e-12));
        }
        Ok(State::new(y))
    }

    fn analytic_exit_forward(&self, x: &[f64]) -> Option<ExitTime> {
        if self.bounded {
            Some(ExitTime::At(1.0 - x[0]))
        } else {
            Some(ExitTime::Never)
        }
    }

    fn analytic_exit_backward(&self, x: &[f64]) -> Option<ExitTime> {
        if self.bounded {
            Some(ExitTime::At(x[0]))
        } else {
            Some(ExitTime::Never)
        }
    }

    fn analytic_interarrival(&self, _x: &[f64], level: f64) -> Option<Result<f64>> {
        if self.rate == 0.0 {
            // The integrated hazard never reaches a positive level.
            return Some(Ok(f64::INFINITY));
        }
        Some(Ok(level / self.rate))
    }

    fn rate_bound_along_flow(&self, _x: &[f64], _horizon: f64) -> Option<f64> {
        Some(self.rate)
    }

    fn flow_velocity(&self, x: &[f64]) -> Option<Vec<f64>> {
        let mut v = vec![0.0; x.len()];
        v[0] = 1.0;
        Some(v)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::semigroup_defect;
    use crate::rng::SeedSequence;
    use crate::simulate::{simulate_chain, JumpMethod};
    use crate::model::SolverSettings;
    use rand::Rng;

    #[test]
    fn invariant_density_values() {
        let m = build_oracle(1, 1.0, true);
        assert!((m.invariant_density(&[0.5]) - 1.5).abs() < 1e-12);
        // Product form in two dimensions.
        let m2 = build_oracle(2, 1.0, true);
        assert!((m2.invariant_density(&[0.5, 0.5]) - 2.25).abs() < 1e-12);
        assert_eq!(m.invariant_density(&[1.2]), 0.0);
    }

    #[test]
    fn beta_density_integrates_to_one() {
        let spec = BetaSpec::new(2.0, 3.0);
        let n = 20_000;
        let mut acc = 0.0;
        for i in 0..n {
            let u = (i as f64 + 0.5) / n as f64;
            acc += spec.density(u) / n as f64;
        }
        assert!((acc - 1.0).abs() < 1e-6);
    }

    #[test]
    fn survival_and_censoring() {
        let m = build_oracle(1, 2.0, true);
        assert!((m.survival(&[0.3], 0.5) - (-1.0f64).exp()).abs() < 1e-12);
        assert_eq!(m.survival(&[0.3], 0.7), 0.0);
        let u = build_oracle(1, 2.0, false);
        assert!((u.survival(&[0.3], 0.7) - (-1.4f64).exp()).abs() < 1e-12);
        assert!((u.kappa(&[0.5], 0.1) - 1.5 * (-0.2f64).exp()).abs() < 1e-12);
    }

    #[test]
    fn semigroup_holds_at_random_probes() {
        let m = build_oracle(2, 1.0, false);
        let mut rng = SeedSequence::new(11).stream(0);
        for _ in 0..100 {
            let x = vec![rng.random::<f64>() * 4.0 - 2.0, rng.random::<f64>()];
            let s = rng.random::<f64>() * 2.0 - 1.0;
            let t = rng.random::<f64>() * 2.0 - 1.0;
            assert!(semigroup_defect(&m, &x, s, t).unwrap() <= 1e-9);
        }
    }

    #[test]
    fn bounded_chain_records_are_censored_draws() {
        let m = build_oracle(1, 1.0, true);
        let settings = SolverSettings::default();
        let mut rng = SeedSequence::new(5).stream(1);
        let chain =
            simulate_chain(&m, &settings, JumpMethod::Auto, &[0.5], 500, &mut rng).unwrap();
        assert_eq!(chain.len(), 500);
        for i in 0..chain.len() {
            let z = chain.state(i)[0];
            assert!(z > 0.0 && z < 1.0);
            let s = chain.interarrival(i);
            assert!(s > 0.0 && s <= 1.0 - z + 1e-12);
            // Boundary flag exactly when the interarrival is the exit time.
            assert_eq!(chain.is_boundary(i), (s - (1.0 - z)).abs() <= 1e-12);
        }
        // Both jump types occur at this rate.
        assert!(chain.boundary_fraction() > 0.1);
        assert!(chain.boundary_fraction() < 0.9);
    }

    #[test]
    fn zero_rate_always_hits_the_boundary() {
        let m = build_oracle(1, 0.0, true);
        let settings = SolverSettings::default();
        let mut rng = SeedSequence::new(6).stream(0);
        let chain =
            simulate_chain(&m, &settings, JumpMethod::Auto, &[0.25], 50, &mut rng).unwrap();
        assert!((chain.interarrival(0) - 0.75).abs() < 1e-12);
        assert!((0..chain.len()).all(|i| chain.is_boundary(i)));
    }
}
