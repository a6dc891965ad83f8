use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("coefficient evaluation is not finite at xi = {xi}")]
    Evaluation { xi: f64 },

    #[error("improper integral diverges: {0}")]
    DivergentIntegral(String),

    #[error("coefficient is not strictly positive at node {index} (value {value})")]
    NonpositiveCoefficient { index: usize, value: f64 },

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("invalid field: {0}")]
    InvalidField(String),

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("invalid initial data: {0}")]
    InvalidInitialData(String),

    #[error("tridiagonal solve failed at row {row}")]
    LinearSolveFailure { row: usize },

    #[error("state became non-finite")]
    NonFiniteState,

    #[error("temperature dropped below zero beyond tolerance (min {min})")]
    NegativeTemperature { min: f64 },

    #[error("coefficient law assumption fails: {0}")]
    AssumptionViolated(String),

    #[error("sup f^2/gamma is infinite")]
    InfiniteLambda,

    #[error("malformed run data: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
