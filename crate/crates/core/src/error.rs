use thiserror::Error;

/// Errors raised by the numerical routines of this crate.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid system: {0}")]
    InvalidSystem(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("exponent overflow: |{exponent}| exceeds {limit}")]
    Overflow { exponent: f64, limit: f64 },
    #[error("series did not converge after {terms} terms")]
    SeriesNonConvergence { terms: usize },
    #[error("series lost too much precision to cancellation (max term {max_term:e}, sum {sum:e})")]
    PrecisionLoss { max_term: f64, sum: f64 },
    #[error("quadrature did not converge (estimated error {estimate:e})")]
    QuadratureNonConvergence { estimate: f64 },
    #[error("zero of the function on the contour near {re} + {im}i")]
    BoundaryZero { re: f64, im: f64 },
    #[error("linear system is singular")]
    Singular,
    #[error("not a root: |f| = {magnitude:e} exceeds {threshold:e}")]
    NotARoot { magnitude: f64, threshold: f64 },
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("time budget exhausted")]
    Timeout,
}

impl Error {
    /// True for errors caused by bad input rather than by the numerics.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::InvalidSystem(_) | Error::InvalidArgument(_) | Error::Precondition(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
