use thiserror::Error;

/// Errors surfaced by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid vertex word: {0}")]
    Encoding(String),

    #[error("ball too large: {vertices} vertices exceeds cap {cap}")]
    BallTooLarge { vertices: u64, cap: u64 },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("truncation insufficient: achieved error {achieved:.3e} exceeds requested {requested:.3e}")]
    Truncation { requested: f64, achieved: f64 },

    #[error("quadrature did not converge: achieved error {achieved:.3e} exceeds requested {requested:.3e}")]
    Quadrature { requested: f64, achieved: f64 },

    #[error("target outside the range of the covariance matrix (residual {residual:.3e})")]
    InfeasibleTarget { residual: f64 },

    #[error("state space too large: {states} states exceeds cap {cap}")]
    StateSpaceTooLarge { states: u64, cap: u64 },

    #[error("invalid configuration: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;
