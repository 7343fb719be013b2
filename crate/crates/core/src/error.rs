use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum FlexError {
    #[error("no sign change of the characteristic function on [{lo}, {hi}]")]
    RootBracket { lo: f64, hi: f64 },

    #[error("position {x} m lies outside the beam [0, {length}] m")]
    Domain { x: f64, length: f64 },

    #[error("quadrature did not converge for {integral}: estimated error {estimate:e} exceeds {tolerance:e}")]
    Quadrature {
        integral: String,
        estimate: f64,
        tolerance: f64,
    },

    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("simulation diverged at t = {time} s (state = {state:?})")]
    Divergence { time: f64, state: Vec<f64> },

    #[error("failed to parse {path}: {message}")]
    Parse { path: PathBuf, message: String },

    #[error("missing file: {0}")]
    MissingFile(PathBuf),

    #[error("malformed output {path}: {message}")]
    Malformed { path: PathBuf, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, FlexError>;
