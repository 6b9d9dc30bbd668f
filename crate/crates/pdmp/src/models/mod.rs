//! The bundled process models: the transmission-control throughput process,
//! the run-and-tumble bacteria motion, fatigue crack growth, and an
//! analytically solvable oracle for calibration.

pub mod bacteria;
pub mod crack;
pub mod oracle;
pub mod tcp;

pub use bacteria::{aggregate_bacteria_lambda, build_bacteria, BacteriaModel};
pub use crack::{
    build_crack_parameter_space, delta_k, forman_flow_rk4, generate_crack_histories,
    ingest_crack_histories, parameter_curve, paris_flow_euler, paris_flow_rk4, paris_rate,
    switches_to_chain, time_to_length, CrackData, CrackHistory, CrackParameterSpace, CrackParams,
    SwitchRecord,
};
pub use oracle::{build_oracle, BetaSpec, OracleModel};
pub use tcp::{build_tcp, TcpModel};

use crate::error::Result;
use crate::model::PdmpModel;
use crate::state::dist;

/// Semigroup defect `|Phi(Phi(x, s), t) - Phi(x, s + t)|`, normalised by
/// `1 + |x|`. Every flow must keep this at rounding level.
pub fn semigroup_defect(model: &dyn PdmpModel, x: &[f64], s: f64, t: f64) -> Result<f64> {
    let two_step = model.flow(&model.flow(x, s)?, t)?;
    let one_step = model.flow(x, s + t)?;
    let scale = 1.0 + crate::state::norm(x);
    Ok(dist(&two_step, &one_step) / scale)
}
