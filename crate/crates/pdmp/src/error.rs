//! Error type shared across the crate.

use thiserror::Error;

/// Unified error for simulation, estimation and I/O failures.
#[derive(Debug, Error)]
pub enum PdmpError {
    /// A state has the wrong dimension for the model or estimator.
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    /// A state lies outside the model domain where an interior point is required.
    #[error("state outside the model domain: {context}")]
    OutsideDomain { context: String },

    /// The flow map produced a non-finite coordinate.
    #[error("non-finite flow output at t = {t}: {context}")]
    NumericalFlow { t: f64, context: String },

    /// A model callback broke its contract (negative rate, post-jump point
    /// outside the domain, bound smaller than the rate, ...).
    #[error("model contract violation: {context}")]
    ModelContract { context: String },

    /// The cumulated hazard stayed below the exponential level with no
    /// boundary to terminate the sojourn.
    #[error("hazard did not reach the level before the horizon ({context})")]
    HazardExhausted { context: String },

    /// The exit-time solver could not produce a bracket or converge.
    #[error("exit-time solver failure: {context}")]
    ExitSolver { context: String },

    /// An error during chain simulation, annotated with the failing record.
    #[error("simulation failed at record {index}: {source}")]
    Simulation {
        index: usize,
        #[source]
        source: Box<PdmpError>,
    },

    /// A streaming estimator was asked about a query it never registered.
    #[error("query not registered in streaming mode")]
    UnregisteredQuery,

    /// The selection criterion vanished on every curve node.
    #[error("selection impossible: estimated criterion is zero on all nodes")]
    SelectionImpossible,

    /// No admissible grid point / empty grid supplied to a search.
    #[error("empty or fully inadmissible grid: {context}")]
    EmptyGrid { context: String },

    /// A curve or tube could not be built (zero-length curve, degenerate frame).
    #[error("geometry construction failed: {context}")]
    Geometry { context: String },

    /// Malformed input data (CSV chain files, crack histories).
    #[error("parse error at line {line}: {context}")]
    Parse { line: usize, context: String },

    /// Invalid configuration values.
    #[error("invalid configuration: {context}")]
    Config { context: String },

    /// Estimation is impossible on the supplied data.
    #[error("estimation impossible: {context}")]
    EstimationImpossible { context: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, PdmpError>;
