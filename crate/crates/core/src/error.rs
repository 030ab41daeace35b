use thiserror::Error;

/// Every failure the engine can report, grouped so the CLI can map them to exit codes.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum RibError {
    #[error("edge {edge} degenerated (length {length:e} m)")]
    DegenerateEdge { edge: usize, length: f64 },
    #[error("tangents are antiparallel; transport is undefined")]
    AntiparallelTangents,
    #[error("consecutive edges at node {node} are antiparallel")]
    AntiparallelEdges { node: usize },
    #[error("ruling generator leaves the strip at element {element} (|W eta'| = {value:.4})")]
    GeneratorOverrun { element: usize, value: f64 },
    #[error("bending strain below guard at element {element}")]
    DivisionGuard { element: usize },
    #[error("linear solve failed on every path")]
    SolveFailed,
    #[error("no convergence at the minimum step size (t = {t:.6} s)")]
    StepFloorExceeded { t: f64 },
    #[error("compression did not buckle the strip (|H_m|/L = {ratio:e})")]
    BucklingNotTriggered { ratio: f64 },
    #[error("configuration fell back onto the symmetric branch during the width ramp (W/L = {width_ratio:.4})")]
    BranchLost { width_ratio: f64 },
    #[error("invalid value: {0}")]
    InvalidInput(String),
    #[error("schema error at `{path}`: {message}")]
    Schema { path: String, message: String },
    #[error("units error at `{path}`: {message}")]
    Units { path: String, message: String },
    #[error("no transition detected in {0}")]
    NoTransition(String),
    #[error("validation failed: {0}")]
    Validation(String),
    #[error("i/o error: {0}")]
    Io(String),
}

impl RibError {
    /// Process exit code for the command-line front end.
    pub fn exit_code(&self) -> i32 {
        use RibError::*;
        match self {
            Schema { .. } | Units { .. } | InvalidInput(_) | Io(_) => 2,
            NoTransition(_) | Validation(_) => 4,
            _ => 3,
        }
    }
}

impl From<std::io::Error> for RibError {
    fn from(e: std::io::Error) -> Self {
        RibError::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, RibError>;
