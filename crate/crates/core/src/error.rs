use thiserror::Error;

use crate::report::SolveReport;

#[derive(Debug, Error)]
pub enum MotError {
    #[error("invalid shape: {0}")]
    Shape(String),

    #[error("axis {axis} out of range for a {order}-way tensor")]
    AxisOutOfRange { axis: usize, order: usize },

    #[error("shape mismatch: {left:?} vs {right:?}")]
    ShapeMismatch { left: Vec<usize>, right: Vec<usize> },

    #[error("invalid instance: {0}")]
    InvalidInstance(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("size cap exceeded: {what} needs {requested} elements, cap is {cap}")]
    SizeCap {
        what: &'static str,
        requested: u128,
        cap: u128,
    },

    #[error("solver did not reach the residue target within {max_iter} iterations (last E = {last_residue:e})")]
    NonConvergence {
        max_iter: usize,
        last_residue: f64,
        report: Box<SolveReport>,
    },

    #[error("parse error: {0}")]
    Parse(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

impl From<serde_json::Error> for MotError {
    fn from(e: serde_json::Error) -> Self {
        MotError::Parse(e.to_string())
    }
}

pub type Result<T, E = MotError> = std::result::Result<T, E>;
