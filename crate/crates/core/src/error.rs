use thiserror::Error;

/// Errors raised when building models or configuring algorithms.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid fractional-order configuration: {0}")]
    InvalidConfig(String),
    #[error("invalid plant: {0}")]
    InvalidPlant(String),
    #[error("invalid channel configuration: {0}")]
    InvalidChannel(String),
    #[error("invalid simulation configuration: {0}")]
    InvalidSim(String),
    #[error("invalid optimizer configuration: {0}")]
    InvalidOptimizer(String),
    #[error("frequency response is singular at omega = {omega}")]
    SingularResponse { omega: f64 },
    #[error("unknown plant preset `{0}`")]
    UnknownPreset(String),
}

pub type Result<T> = std::result::Result<T, Error>;
