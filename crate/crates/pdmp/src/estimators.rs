//! Recursive kernel estimators of the embedded-chain law.
//!
//! For registered query points `(x, t)` the state maintains the three
//! running sums
//!
//! ```text
//! f: sum_k v_k^-d w_k^-1 K((Z_k - x)/v_k) K1((S_k+1 - t)/w_k)
//! g: sum_k v_k^-d        K((Z_k - x)/v_k) 1{S_k+1 > t}
//! nu: sum_k v_k^-d       K((Z_k - x)/v_k)
//! ```
//!
//! each divided by the record count on read-out. Records enter one at a
//! time with their own bandwidths, so streaming a chain record by record
//! and accumulating it in one batch run the same arithmetic in the same
//! order and produce identical floats.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{PdmpError, Result};
use crate::kernels::{BandwidthSchedule, Kernel};
use crate::simulate::EmbeddedChain;

/// A spatial point and a time at which the estimators are tracked.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QueryPoint {
    pub x: Vec<f64>,
    pub t: f64,
}

impl QueryPoint {
    pub fn new(x: Vec<f64>, t: f64) -> Self {
        QueryPoint { x, t }
    }
}

/// Running sums for one query, before division by the record count.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RawSums {
    pub f: f64,
    pub g: f64,
    pub nu: f64,
}

/// Normalised estimator values at one query.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Estimates {
    pub f_hat: f64,
    pub g_hat: f64,
    pub nu_hat: f64,
}

/// A ratio of estimators with the degenerate cases kept explicit:
/// `0/0` is zero (nothing was observed there), a positive numerator over a
/// zero denominator is flagged infinite.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub enum Ratio {
    Finite(f64),
    Infinite,
}

impl Ratio {
    pub fn of(num: f64, den: f64) -> Ratio {
        if den > 0.0 {
            Ratio::Finite(num / den)
        } else if num == 0.0 {
            Ratio::Finite(0.0)
        } else {
            Ratio::Infinite
        }
    }

    pub fn value(self) -> f64 {
        match self {
            Ratio::Finite(v) => v,
            Ratio::Infinite => f64::INFINITY,
        }
    }

    pub fn is_finite(self) -> bool {
        matches!(self, Ratio::Finite(_))
    }
}

#[derive(Serialize, Deserialize)]
struct Snapshot {
    schedule: BandwidthSchedule,
    kernel_space: String,
    kernel_time: String,
    queries: Vec<QueryPoint>,
    sums: Vec<RawSums>,
    count: usize,
}

/// Streaming estimator state over a fixed set of queries.
#[derive(Clone, Debug)]
pub struct EstimatorState {
    kernel_space: Kernel,
    kernel_time: Kernel,
    schedule: BandwidthSchedule,
    queries: Vec<QueryPoint>,
    sums: Vec<RawSums>,
    count: usize,
}

impl EstimatorState {
    pub fn new(kernel_space: Kernel, kernel_time: Kernel, schedule: BandwidthSchedule) -> Self {
        assert_eq!(kernel_time.dim(), 1, "the interarrival kernel is one-dimensional");
        EstimatorState {
            kernel_space,
            kernel_time,
            schedule,
            queries: Vec::new(),
            sums: Vec::new(),
            count: 0,
        }
    }

    pub fn with_queries(
        kernel_space: Kernel,
        kernel_time: Kernel,
        schedule: BandwidthSchedule,
        queries: Vec<QueryPoint>,
    ) -> Result<Self> {
        let mut state = EstimatorState::new(kernel_space, kernel_time, schedule);
        for q in queries {
            state.register_query(q)?;
        }
        Ok(state)
    }

    /// Registers a query. Queries must all be in place before the first
    /// record: a recursive estimator cannot back-fill earlier records.
    pub fn register_query(&mut self, q: QueryPoint) -> Result<usize> {
        if self.count > 0 {
            return Err(PdmpError::Config {
                context: "queries must be registered before any record is accumulated".into(),
            });
        }
        if q.x.len() != self.kernel_space.dim() {
            return Err(PdmpError::DimensionMismatch {
                expected: self.kernel_space.dim(),
                got: q.x.len(),
            });
        }
        self.queries.push(q);
        self.sums.push(RawSums::default());
        Ok(self.queries.len() - 1)
    }

    pub fn queries(&self) -> &[QueryPoint] {
        &self.queries
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn schedule(&self) -> BandwidthSchedule {
        self.schedule
    }

    pub fn dim(&self) -> usize {
        self.kernel_space.dim()
    }

    /// Folds one record `(z, s)` into every query's sums.
    pub fn accumulate_record(&mut self, z: &[f64], s: f64) {
        debug_assert_eq!(z.len(), self.kernel_space.dim());
        let k = self.count;
        let v_inv = 1.0 / self.schedule.v(k);
        let w_inv = 1.0 / self.schedule.w(k);
        let v_inv_d = v_inv.powi(self.kernel_space.dim() as i32);
        for (q, sums) in self.queries.iter().zip(self.sums.iter_mut()) {
            let ks = self.kernel_space.eval_scaled_diff(z, &q.x, v_inv);
            if ks > 0.0 {
                let spatial = v_inv_d * ks;
                sums.nu += spatial;
                if s > q.t {
                    sums.g += spatial;
                }
                let kt = self.kernel_time.eval_scalar((s - q.t) * w_inv);
                if kt > 0.0 {
                    sums.f += spatial * w_inv * kt;
                }
            }
        }
        self.count += 1;
    }

    /// Accumulates a whole chain. Exactly equivalent to streaming the
    /// records one by one.
    pub fn accumulate_chain(&mut self, chain: &EmbeddedChain) {
        for i in 0..chain.len() {
            self.accumulate_record(chain.state(i), chain.interarrival(i));
        }
    }

    fn check_idx(&self, idx: usize) -> Result<()> {
        if idx < self.queries.len() {
            Ok(())
        } else {
            Err(PdmpError::UnregisteredQuery)
        }
    }

    /// Raw sums of query `idx`, before normalisation.
    pub fn raw_sums(&self, idx: usize) -> Result<RawSums> {
        self.check_idx(idx)?;
        Ok(self.sums[idx])
    }

    /// Normalised estimates at query `idx`. All zero before any record.
    pub fn estimates(&self, idx: usize) -> Result<Estimates> {
        self.check_idx(idx)?;
        if self.count == 0 {
            return Ok(Estimates { f_hat: 0.0, g_hat: 0.0, nu_hat: 0.0 });
        }
        let n = self.count as f64;
        let s = self.sums[idx];
        Ok(Estimates { f_hat: s.f / n, g_hat: s.g / n, nu_hat: s.nu / n })
    }

    pub fn f_hat(&self, idx: usize) -> Result<f64> {
        Ok(self.estimates(idx)?.f_hat)
    }

    pub fn g_hat(&self, idx: usize) -> Result<f64> {
        Ok(self.estimates(idx)?.g_hat)
    }

    pub fn nu_hat(&self, idx: usize) -> Result<f64> {
        Ok(self.estimates(idx)?.nu_hat)
    }

    /// Jump-rate estimate `f_hat / g_hat` at query `idx`.
    pub fn lambda_hat(&self, idx: usize) -> Result<Ratio> {
        let e = self.estimates(idx)?;
        Ok(Ratio::of(e.f_hat, e.g_hat))
    }

    /// Conditional survival estimate `g_hat / nu_hat` at query `idx`.
    pub fn g_conditional(&self, idx: usize) -> Result<Ratio> {
        let e = self.estimates(idx)?;
        Ok(Ratio::of(e.g_hat, e.nu_hat))
    }

    /// Conditional survival with a report flag raised when the ratio falls
    /// outside `[0, 1.05]`: a finite-sample estimate may briefly exceed one,
    /// but by more than 5% only where the denominator is unreliable.
    pub fn g_conditional_flagged(&self, idx: usize) -> Result<(f64, bool)> {
        let value = self.g_conditional(idx)?.value();
        Ok((value, !(0.0..=1.05).contains(&value)))
    }

    /// Conditional interarrival density estimate `f_hat / nu_hat`.
    pub fn f_conditional(&self, idx: usize) -> Result<Ratio> {
        let e = self.estimates(idx)?;
        Ok(Ratio::of(e.f_hat, e.nu_hat))
    }

    /// Serialises the full state (schedule, kernels, queries, sums, count)
    /// so accumulation can resume in a later process.
    pub fn save_snapshot(&self, w: &mut dyn Write) -> Result<()> {
        let snap = Snapshot {
            schedule: self.schedule,
            kernel_space: self.kernel_space.name(),
            kernel_time: self.kernel_time.name(),
            queries: self.queries.clone(),
            sums: self.sums.clone(),
            count: self.count,
        };
        serde_json::to_writer_pretty(&mut *w, &snap).map_err(|e| PdmpError::Parse {
            line: 0,
            context: format!("snapshot serialisation failed: {e}"),
        })?;
        writeln!(w)?;
        Ok(())
    }

    pub fn load_snapshot(r: &mut dyn Read) -> Result<EstimatorState> {
        let snap: Snapshot = serde_json::from_reader(r).map_err(|e| PdmpError::Parse {
            line: 0,
            context: format!("snapshot deserialisation failed: {e}"),
        })?;
        let kernel_space = Kernel::from_name(&snap.kernel_space)?;
        let kernel_time = Kernel::from_name(&snap.kernel_time)?;
        if kernel_time.dim() != 1 {
            return Err(PdmpError::Config {
                context: "snapshot interarrival kernel is not one-dimensional".into(),
            });
        }
        if snap.sums.len() != snap.queries.len() {
            return Err(PdmpError::Config {
                context: "snapshot sums and queries differ in length".into(),
            });
        }
        for q in &snap.queries {
            if q.x.len() != kernel_space.dim() {
                return Err(PdmpError::DimensionMismatch {
                    expected: kernel_space.dim(),
                    got: q.x.len(),
                });
            }
        }
        Ok(EstimatorState {
            kernel_space,
            kernel_time,
            schedule: snap.schedule,
            queries: snap.queries,
            sums: snap.sums,
            count: snap.count,
        })
    }
}

/// Batch evaluation over a stored chain: the same sums by direct summation.
///
/// Deliberately written apart from the streaming recursion so that the two
/// evaluation modes check each other; the acceptance suite compares them for
/// agreement at relative 1e-12.
pub fn batch_eval(
    chain: &EmbeddedChain,
    kernel_space: &Kernel,
    kernel_time: &Kernel,
    schedule: BandwidthSchedule,
    queries: &[QueryPoint],
) -> Result<Vec<Estimates>> {
    assert_eq!(kernel_time.dim(), 1, "the interarrival kernel is one-dimensional");
    let d = kernel_space.dim();
    for q in queries {
        if q.x.len() != d {
            return Err(PdmpError::DimensionMismatch { expected: d, got: q.x.len() });
        }
    }
    let n = chain.len();
    let mut out = Vec::with_capacity(queries.len());
    for q in queries {
        let mut sums = RawSums::default();
        for k in 0..n {
            let v_inv = 1.0 / schedule.v(k);
            let w_inv = 1.0 / schedule.w(k);
            let ks = kernel_space.eval_scaled_diff(chain.state(k), &q.x, v_inv);
            if ks > 0.0 {
                let spatial = v_inv.powi(d as i32) * ks;
                let s = chain.interarrival(k);
                sums.nu += spatial;
                if s > q.t {
                    sums.g += spatial;
                }
                let kt = kernel_time.eval_scalar((s - q.t) * w_inv);
                if kt > 0.0 {
                    sums.f += spatial * w_inv * kt;
                }
            }
        }
        if n == 0 {
            out.push(Estimates { f_hat: 0.0, g_hat: 0.0, nu_hat: 0.0 });
        } else {
            let nf = n as f64;
            out.push(Estimates { f_hat: sums.f / nf, g_hat: sums.g / nf, nu_hat: sums.nu / nf });
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_record_state() -> EstimatorState {
        let schedule = BandwidthSchedule::new(0.5, 0.5, 0.5, 0.5);
        let mut st = EstimatorState::new(Kernel::epanechnikov(1), Kernel::epanechnikov(1), schedule);
        st.register_query(QueryPoint::new(vec![0.2], 0.25)).unwrap();
        st
    }

    #[test]
    fn two_record_sums_by_hand() {
        let mut st = two_record_state();
        st.accumulate_record(&[0.2], 0.3);
        st.accumulate_record(&[0.25], 0.1);

        // Record 0: v = w = 0.5.
        let sp0 = 2.0 * 0.75;
        let f0 = sp0 * 2.0 * (0.75 * (1.0 - 0.1f64 * 0.1));
        // Record 1: v = w = 0.5 / sqrt(2); survival indicator fails.
        let v1 = BandwidthSchedule::new(0.5, 0.5, 0.5, 0.5).v(1);
        let u_space = 0.05 / v1;
        let sp1 = (1.0 / v1) * (0.75 * (1.0 - u_space * u_space));
        let u_time = (0.1 - 0.25) / v1;
        let f1 = sp1 * (1.0 / v1) * (0.75 * (1.0 - u_time * u_time));

        let raw = st.raw_sums(0).unwrap();
        assert!((raw.nu - (sp0 + sp1)).abs() < 1e-13 * raw.nu);
        assert!((raw.g - sp0).abs() < 1e-13 * raw.g);
        assert!((raw.f - (f0 + f1)).abs() < 1e-13 * raw.f);

        let est = st.estimates(0).unwrap();
        assert!((est.nu_hat - raw.nu / 2.0).abs() < 1e-15);
    }

    #[test]
    fn record_order_matters() {
        let mut a = two_record_state();
        a.accumulate_record(&[0.2], 0.3);
        a.accumulate_record(&[0.25], 0.1);
        let mut b = two_record_state();
        b.accumulate_record(&[0.25], 0.1);
        b.accumulate_record(&[0.2], 0.3);
        // Recursive bandwidths tie each record to its position.
        assert_ne!(a.raw_sums(0).unwrap(), b.raw_sums(0).unwrap());
    }

    #[test]
    fn survival_indicator_at_time_zero_matches_nu() {
        let schedule = BandwidthSchedule::new(0.5, 0.3, 0.5, 0.3);
        let mut st =
            EstimatorState::new(Kernel::epanechnikov(1), Kernel::epanechnikov(1), schedule);
        st.register_query(QueryPoint::new(vec![0.5], 0.0)).unwrap();
        for i in 0..50 {
            let z = 0.3 + 0.4 * ((i * 7 % 11) as f64 / 11.0);
            st.accumulate_record(&[z], 0.01 + 0.1 * (i as f64 % 5.0));
        }
        let e = st.estimates(0).unwrap();
        // Interarrivals are strictly positive, so the indicator always fires.
        assert_eq!(e.g_hat, e.nu_hat);
    }

    #[test]
    fn ratio_conventions() {
        assert_eq!(Ratio::of(0.0, 0.0), Ratio::Finite(0.0));
        assert_eq!(Ratio::of(1.5, 0.5), Ratio::Finite(3.0));
        assert_eq!(Ratio::of(0.2, 0.0), Ratio::Infinite);
        assert!(!Ratio::of(0.2, 0.0).is_finite());
        assert_eq!(Ratio::Infinite.value(), f64::INFINITY);
    }

    #[test]
    fn late_registration_is_rejected() {
        let mut st = two_record_state();
        st.accumulate_record(&[0.2], 0.3);
        assert!(st.register_query(QueryPoint::new(vec![0.5], 0.1)).is_err());
        assert!(matches!(st.raw_sums(3), Err(PdmpError::UnregisteredQuery)));
    }

    #[test]
    fn conditional_ratios_and_the_clip_flag() {
        let mut st = two_record_state();
        st.accumulate_record(&[0.2], 0.3);
        let (g, clipped) = st.g_conditional_flagged(0).unwrap();
        // A single surviving record: g equals nu, the ratio is one.
        assert!((g - 1.0).abs() < 1e-15);
        assert!(!clipped);
        let f = st.f_conditional(0).unwrap();
        let e = st.estimates(0).unwrap();
        assert_eq!(f, Ratio::Finite(e.f_hat / e.nu_hat));
    }

    #[test]
    fn batch_matches_streaming() {
        let schedule = BandwidthSchedule::new(0.4, 0.3, 0.4, 0.4);
        let mut chain = EmbeddedChain::new(2);
        for i in 0..40 {
            let a = (i * 13 % 17) as f64 / 17.0;
            let b = (i * 5 % 7) as f64 / 7.0;
            chain.push(&[0.1 + 0.8 * a, 0.1 + 0.8 * b], 0.05 + a + 0.3 * b, false);
        }
        let queries = vec![
            QueryPoint::new(vec![0.5, 0.5], 0.4),
            QueryPoint::new(vec![0.25, 0.75], 0.0),
        ];
        let ks = Kernel::epanechnikov(2);
        let kt = Kernel::epanechnikov(1);
        let mut st =
            EstimatorState::with_queries(ks.clone(), kt.clone(), schedule, queries.clone())
                .unwrap();
        st.accumulate_chain(&chain);
        let batch = batch_eval(&chain, &ks, &kt, schedule, &queries).unwrap();
        for (i, b) in batch.iter().enumerate() {
            let s = st.estimates(i).unwrap();
            assert!((b.f_hat - s.f_hat).abs() <= 1e-12 * s.f_hat.abs().max(1.0));
            assert!((b.g_hat - s.g_hat).abs() <= 1e-12 * s.g_hat.abs().max(1.0));
            assert!((b.nu_hat - s.nu_hat).abs() <= 1e-12 * s.nu_hat.abs().max(1.0));
        }
        assert!(batch[0].nu_hat > 0.0);
    }

    #[test]
    fn snapshot_round_trip_preserves_sums_exactly() {
        let mut st = two_record_state();
        st.accumulate_record(&[0.2], 0.3);
        let mut buf = Vec::new();
        st.save_snapshot(&mut buf).unwrap();
        let mut back = EstimatorState::load_snapshot(&mut &buf[..]).unwrap();
        assert_eq!(back.count(), 1);
        assert_eq!(back.raw_sums(0).unwrap(), st.raw_sums(0).unwrap());
        // Resumed accumulation continues the recursion at record 1.
        back.accumulate_record(&[0.25], 0.1);
        st.accumulate_record(&[0.25], 0.1);
        assert_eq!(back.raw_sums(0).unwrap(), st.raw_sums(0).unwrap());
    }
}
