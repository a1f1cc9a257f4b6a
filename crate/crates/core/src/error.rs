use thiserror::Error;

/// Failure modes shared by every module of the crate.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("iteration failed to converge: {0}")]
    Convergence(String),
    #[error("quadrature failed: {0}")]
    Quadrature(String),
    #[error("verification failed: {0}")]
    Verification(String),
    #[error("form degree exceeds the available generators: {0}")]
    Degree(String),
    #[error("form has the wrong bidegree: {0}")]
    Type(String),
    #[error("form has components outside the expected basis: {0}")]
    Basis(String),
    #[error("positivity failure: {0}")]
    Positivity(String),
    #[error("search failed: {0}")]
    Search(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Domain(msg.into()))
}
