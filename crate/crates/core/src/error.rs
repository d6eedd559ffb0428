use thiserror::Error;

use crate::newton::NewtonReport;

#[derive(Debug, Error)]
pub enum FlowError {
    #[error("invalid curve: {0}")]
    InvalidCurve(String),

    #[error("degenerate edge {index}: length {length:e} below threshold {threshold:e}")]
    DegenerateEdge {
        index: usize,
        length: f64,
        threshold: f64,
    },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// The linearly interpolated edge passes (too close to) zero length
    /// somewhere inside the time step.
    #[error("edge {element} collapses during the step (min length {min_length:e})")]
    EdgeCollapse { element: usize, min_length: f64 },

    #[error("singular linear system (zero pivot at row {row})")]
    Singular { row: usize },

    #[error("ill-conditioned linear system (backward error {backward_error:e}, pivot ratio {condition_estimate:e})")]
    IllConditioned {
        backward_error: f64,
        condition_estimate: f64,
    },

    #[error("Newton iteration did not converge after {} iterations", report.iterations)]
    NewtonDiverged { report: NewtonReport },

    #[error("time step {step} failed after {retries} step-halving retries: {source}")]
    StepFailed {
        step: usize,
        retries: usize,
        #[source]
        source: Box<FlowError>,
    },

    #[error("io: {0}")]
    Io(#[from] std::io::Error),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
}

pub type Result<T> = std::result::Result<T, FlowError>;
