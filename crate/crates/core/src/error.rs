use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid problem: {0}")]
    InvalidProblem(String),

    #[error("empty junction control set: {edges} edges with floor {floor} gives {edges}*floor > 1")]
    EmptyControlSet { edges: usize, floor: f64 },

    #[error("ellipticity violated on edge {edge} at x = {x}: sigma = {sigma} < {floor}")]
    Ellipticity { edge: usize, x: f64, sigma: f64, floor: f64 },

    #[error("junction root bracket not found at time level {level} (|u0| exceeded {limit:e})")]
    JunctionBracket { level: usize, limit: f64 },

    #[error("junction root did not converge at time level {level}: residual {residual:e}")]
    JunctionResidual { level: usize, residual: f64 },

    #[error("time step {dt:e} exceeds explicit limit {limit:e} at time level {level}")]
    StepTooLarge { level: usize, dt: f64, limit: f64 },

    #[error("non-finite value in {context}")]
    NonFinite { context: String },

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("invalid simulation request: {0}")]
    InvalidSimulation(String),

    #[error("scenario error: {0}")]
    Scenario(String),

    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(err: std::io::Error) -> Self {
        Error::Io(err.to_string())
    }
}
