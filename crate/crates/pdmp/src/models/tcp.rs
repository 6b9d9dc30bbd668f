//! Window-size dynamics of a congestion-controlled transfer: the window
//! grows linearly until a loss resets it multiplicatively. State is
//! `(window, threshold)` rescaled to the open unit square; losses arrive at
//! rate `x1 + x2` and reset both coordinates through Beta kernels.

use rand::distr::Distribution;
use rand::RngCore;
use rand_distr::Beta;

use crate::error::{PdmpError, Result};
use crate::model::{ExitTime, PdmpModel};
use crate::state::State;

#[derive(Clone, Copy, Debug, Default)]
pub struct TcpModel;

pub fn build_tcp() -> TcpModel {
    TcpModel
}

impl PdmpModel for TcpModel {
    fn name(&self) -> &'static str {
        "tcp"
    }

    fn dim(&self) -> usize {
        2
    }

    fn flow(&self, x: &[f64], t: f64) -> Result<State> {
        Ok(State::new(vec![x[0] + t, x[1]]))
    }

    fn rate(&self, x: &[f64]) -> Result<f64> {
        Ok(x[0] + x[1])
    }

    fn in_domain(&self, x: &[f64]) -> bool {
        x.iter().all(|&c| c > 0.0 && c < 1.0)
    }

    fn sample_post_jump(
        &self,
        x: &[f64],
        _boundary: bool,
        rng: &mut dyn RngCore,
    ) -> Result<State> {
        // The first coordinate contracts harder after large windows: the
        // second Beta shape is 2 / x1 of the pre-jump state.
        let b1 = Beta::new(2.0, 2.0 / x[0]).map_err(|e| PdmpError::ModelContract {
            context: format!("invalid window kernel at x1 = {}: {e}", x[0]),
        })?;
        let b2 = Beta::new(2.0, 2.0).expect("fixed Beta(2, 2)");
        let y1: f64 = b1.sample(rng);
        let y2: f64 = b2.sample(rng);
        Ok(State::new(vec![
            y1.clamp(1e-12, 1.0 - 1e-12),
            y2.clamp(1e-12, 1.0 - 1e-12),
        ]))
    }

    fn analytic_exit_forward(&self, x: &[f64]) -> Option<ExitTime> {
        Some(ExitTime::At(1.0 - x[0]))
    }

    fn analytic_exit_backward(&self, x: &[f64]) -> Option<ExitTime> {
        Some(ExitTime::At(x[0]))
    }

    /// Solves `int_0^t (a + s) ds = level` with `a = x1 + x2`:
    /// `t = -a + sqrt(a^2 + 2 level)`.
    fn analytic_interarrival(&self, x: &[f64], level: f64) -> Option<Result<f64>> {
        let a = x[0] + x[1];
        Some(Ok(-a + (a * a + 2.0 * level).sqrt()))
    }

    fn rate_bound_along_flow(&self, x: &[f64], horizon: f64) -> Option<f64> {
        Some(x[0] + x[1] + horizon)
    }

    fn flow_velocity(&self, _x: &[f64]) -> Option<Vec<f64>> {
        Some(vec![1.0, 0.0])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{exit_time_forward, SolverSettings};
    use crate::models::semigroup_defect;
    use crate::rng::SeedSequence;
    use crate::simulate::{invert_hazard_level, simulate_chain, HazardInversion, JumpMethod};
    use rand::Rng;

    #[test]
    fn flow_and_rate_examples() {
        let m = build_tcp();
        let y = m.flow(&[0.2, 0.5], 0.3).unwrap();
        assert!((y[0] - 0.5).abs() < 1e-15);
        assert!((y[1] - 0.5).abs() < 1e-15);
        assert!((m.rate(&[0.75, 0.5]).unwrap() - 1.25).abs() < 1e-15);
    }

    #[test]
    fn exits_are_the_square_faces() {
        let m = build_tcp();
        let s = SolverSettings::default();
        let exit = exit_time_forward(&m, &s, &[0.75, 0.5]).unwrap();
        assert_eq!(exit, ExitTime::At(0.25));
        assert_eq!(m.analytic_exit_backward(&[0.75, 0.5]), Some(ExitTime::At(0.75)));
    }

    #[test]
    fn interarrival_solves_the_hazard() {
        let m = build_tcp();
        let x = [0.2, 0.3];
        for level in [0.05, 0.3, 1.0] {
            let t = m.analytic_interarrival(&x, level).unwrap().unwrap();
            // Integrated hazard along the flow: a t + t^2 / 2.
            let a = 0.5;
            assert!((a * t + 0.5 * t * t - level).abs() < 1e-12);
        }
    }

    #[test]
    fn generic_inversion_agrees_with_the_closed_form() {
        let m = build_tcp();
        let s = SolverSettings::default();
        let x = [0.2, 0.3];
        let level = 0.3;
        let want = m.analytic_interarrival(&x, level).unwrap().unwrap();
        match invert_hazard_level(&m, &s, &x, level, Some(0.8)).unwrap() {
            HazardInversion::Jump(t) => assert!((t - want).abs() < 1e-6),
            other => panic!("expected a jump, got {other:?}"),
        }
    }

    #[test]
    fn semigroup_holds_at_random_probes() {
        let m = build_tcp();
        let mut rng = SeedSequence::new(12).stream(0);
        for _ in 0..100 {
            let x = vec![rng.random::<f64>(), rng.random::<f64>()];
            let s = rng.random::<f64>() - 0.5;
            let t = rng.random::<f64>() - 0.5;
            assert!(semigroup_defect(&m, &x, s, t).unwrap() <= 1e-9);
        }
    }

    #[test]
    fn chain_stays_in_the_square() {
        let m = build_tcp();
        let s = SolverSettings::default();
        let mut rng = SeedSequence::new(7).stream(0);
        let chain =
            simulate_chain(&m, &s, JumpMethod::Auto, &[0.75, 0.5], 1000, &mut rng).unwrap();
        for i in 0..chain.len() {
            let z = chain.state(i);
            assert!(m.in_domain(z));
            let s_i = chain.interarrival(i);
            assert!(s_i > 0.0 && s_i <= 1.0 - z[0] + 1e-12);
            assert_eq!(chain.is_boundary(i), (s_i - (1.0 - z[0])).abs() <= 1e-12);
        }
        // Both jump types occur: losses and forced resets at the face.
        let bf = chain.boundary_fraction();
        assert!(bf > 0.05 && bf < 0.8, "boundary fraction {bf}");
    }

    #[test]
    fn thinning_matches_the_analytic_path_in_law() {
        use crate::diagnostics::ks_two_sample;
        let m = build_tcp();
        let s = SolverSettings::default();
        let seq = SeedSequence::new(40);
        let a = simulate_chain(&m, &s, JumpMethod::Auto, &[0.2, 0.3], 2000, &mut seq.stream(0))
            .unwrap();
        let b =
            simulate_chain(&m, &s, JumpMethod::Thinning, &[0.2, 0.3], 2000, &mut seq.stream(1))
                .unwrap();
        let d = ks_two_sample(a.interarrivals(), b.interarrivals());
        assert!(d < 0.05, "KS distance {d}");
    }
}
