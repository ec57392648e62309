use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("tridiagonal system is singular at row {row}")]
    SingularSystem { row: usize },

    #[error("negative density {value:e} at t = {t} (cell {index})")]
    Negativity { t: f64, index: usize, value: f64 },

    #[error("CFL violation: dt = {dt} exceeds dx = {dx}")]
    Cfl { dt: f64, dx: f64 },

    #[error("support escapes the target grid: {fraction:e} of the mass lies beyond the covered radius")]
    SupportEscapes { fraction: f64 },

    #[error("trajectory not settled: end slope changed by {relative_change:.3} (relative)")]
    NotSettled { relative_change: f64 },

    #[error("trajectory too short: {0}")]
    TooShort(String),
}

pub type Result<T> = std::result::Result<T, Error>;
