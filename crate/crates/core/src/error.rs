use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("{what}: dimension {dim} exceeds budget {budget}")]
    Capacity { what: String, dim: usize, budget: usize },
    #[error("malformed move: {0}")]
    MalformedMove(String),
    #[error("state belongs to a different basis")]
    BasisMismatch,
    #[error("collapse onto a branch with norm {norm:e}")]
    DegenerateCollapse { norm: f64 },
    #[error("operator maps configuration {0} outside the sector")]
    SectorEscape(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("norm of the projected state vanished at round {tau}")]
    VanishingNorm { tau: usize },
    #[error("eigensolver did not converge after {iterations} iterations (residual {residual:e})")]
    NonConvergence { iterations: usize, residual: f64 },
    #[error("fit window [{lo}, {hi}] holds {points} points, need {needed}")]
    WindowTooShort { lo: f64, hi: f64, points: usize, needed: usize },
    #[error("degenerate fit: {0}")]
    DegenerateFit(String),
    #[error("series never crosses target {target}")]
    NoCrossing { target: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;
