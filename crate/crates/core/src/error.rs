use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// An argument lies outside the support or admissible range.
    #[error("domain error: {0}")]
    Domain(String),

    /// The distribution cannot provide the requested derivative order.
    #[error(
        "quantile derivative of order {requested} requested, but at most {available} is available"
    )]
    Capability { requested: usize, available: usize },

    /// A finite-difference stencil would leave the safe interior.
    #[error("finite-difference stencil unstable at a={at}: need distance {required} from the boundary, have {distance}")]
    Stability {
        at: f64,
        distance: f64,
        required: f64,
    },

    #[error("invalid argument: {0}")]
    Argument(String),

    /// Adaptive quadrature exhausted its subdivision budget.
    #[error(
        "quadrature did not converge: estimated error {achieved:e} exceeds tolerance {requested:e}"
    )]
    Quadrature { achieved: f64, requested: f64 },

    #[error("numerical error: {0}")]
    Numerical(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Parse(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
