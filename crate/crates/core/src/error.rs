use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("unsupported SBP order {0} (supported: 2, 4)")]
    UnsupportedOrder(usize),

    #[error("{n} nodes is below the minimum width {min} for order {order}")]
    TooFewNodes { order: usize, n: usize, min: usize },

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("size mismatch: {0}")]
    SizeMismatch(String),

    #[error("invalid fluid parameters: {0}")]
    InvalidFluids(String),

    #[error("non-positive mixture density {value:e} at node {node} (x={x}, y={y})")]
    NonPositiveDensity { node: usize, x: f64, y: f64, value: f64 },

    #[error("phi0 = {value:e} fell below the positivity floor {floor:e} at node {node}")]
    Positivity { node: usize, value: f64, floor: f64 },

    #[error("invalid penalty: {0}")]
    InvalidPenalty(String),

    #[error("boundary data error: {0}")]
    BoundaryData(String),

    #[error("pressure solve failed: {0}")]
    Solver(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("energy identity violated at t={t}: residual {residual:e} > {bound:e}")]
    IdentityViolation { t: f64, residual: f64, bound: f64 },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
