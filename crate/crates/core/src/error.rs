use thiserror::Error;

/// Errors raised by grid construction, field algebra, drifts and solvers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("contract violation: {0}")]
    Contract(String),
    #[error("subdomain at distance {distance} from the boundary is empty (inradius {inradius})")]
    EmptySubdomain { distance: f64, inradius: f64 },
    #[error("non-finite solution values at step {step}")]
    Diverged { step: usize },
    #[error("zero pivot at row {row} of banded factorization")]
    SingularMatrix { row: usize },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn contract(msg: impl Into<String>) -> Error {
    Error::Contract(msg.into())
}

pub(crate) fn config(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}
