use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("point {0:?} lies outside the domain of `{1}`")]
    Domain(Vec<f64>, String),
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },
    #[error("insufficient resolution: {0}")]
    Resolution(String),
    #[error("size guard: {0}")]
    SizeGuard(String),
    #[error("degenerate fit: {0}")]
    DegenerateFit(String),
    #[error("orbit hits the target set exactly at time {0}")]
    ExactHit(usize),
    #[error("undefined: {0}")]
    Undefined(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter { name, reason: reason.into() }
}
