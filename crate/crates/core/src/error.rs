use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("integrand is singular at the origin for p = {p} without mollification")]
    Singularity { p: f64 },

    #[error("numerical failure: {message} (residual {residual:e})")]
    Numerical { message: String, residual: f64 },

    #[error("mesh generation failed: {0}")]
    Mesh(String),

    #[error("Newton iteration diverged at epsilon = {epsilon:e} after {iterations} iterations (last residual {last_residual:e})")]
    NewtonDivergence {
        epsilon: f64,
        iterations: usize,
        last_residual: f64,
        residual_history: Vec<f64>,
        iterate: Vec<f64>,
    },

    #[error("measure extraction failed: clamped negative mass {clamped:e} exceeds {limit:e}")]
    MeasureExtraction { clamped: f64, limit: f64 },

    #[error("cannot certify winding number: |grad u| = {magnitude:e} at level-curve vertex {vertex} of component {component}")]
    Uncertifiable { component: usize, vertex: usize, magnitude: f64 },

    #[error("configuration error in `{field}`: {message}")]
    Config { field: String, message: String },

    #[error("consistency error: {0}")]
    Consistency(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn input(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub fn config(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config { field: field.into(), message: message.into() }
    }
}
