use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("non-finite entry at ({row}, {col})")]
    NonFinite { row: usize, col: usize },
    #[error("shape mismatch: expected {expected:?}, got {got:?}")]
    Shape {
        expected: (usize, usize),
        got: (usize, usize),
    },
    #[error("empty matrix")]
    Empty,
    #[error("spectrum is all zero; projection is undefined")]
    ZeroSpectrum,
    #[error("invalid parameter: {0}")]
    InvalidParam(String),
    #[error("index {index} out of range 0..={max}")]
    IndexOutOfRange { index: usize, max: usize },
    #[error("negative radicand {0} in step coefficient")]
    NegativeRadicand(f64),
    #[error("component {component}: covariance update is numerically singular")]
    SingularUpdate { component: usize },
    #[error("matrix is not positive definite")]
    NotPositiveDefinite,
    #[error("state diverged at step {step}")]
    Diverged { step: usize },
    #[error("point is off the manifold (distance {0:e})")]
    OffManifold(f64),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("config error: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
