use thiserror::Error;

/// Errors raised by the numerical routines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeoError {
    #[error("point ({x:.6}, {y:.6}) lies outside the {what} (radius {radius})")]
    OutsideDomain {
        x: f64,
        y: f64,
        radius: f64,
        what: &'static str,
    },

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("geodesic from ({x:.4}, {y:.4}) did not exit after {steps} steps (trapped or non-simple geometry)")]
    Trapped { x: f64, y: f64, steps: usize },

    #[error("solver failed to converge: residual {residual:.3e} after {iterations} iterations")]
    NoConvergence { residual: f64, iterations: usize },

    #[error("residual grew by a factor {factor:.2} at iteration {iteration}; forward/transpose mismatch")]
    Divergence { factor: f64, iteration: usize },

    #[error("insufficient resolution: {0}")]
    Resolution(String),

    #[error("model is not simple: {0}")]
    NotSimple(String),

    #[error("non-finite value encountered in {0}")]
    NonFinite(&'static str),

    #[error("linear algebra failure: {0}")]
    LinearAlgebra(String),

    #[error("i/o error: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, GeoError>;

impl From<std::io::Error> for GeoError {
    fn from(e: std::io::Error) -> Self {
        GeoError::Io(e.to_string())
    }
}

impl From<csv::Error> for GeoError {
    fn from(e: csv::Error) -> Self {
        GeoError::Io(e.to_string())
    }
}
