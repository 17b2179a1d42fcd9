use thiserror::Error;

/// Errors produced by the sequence-design library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("tangent vectors are anchored at different points")]
    AnchorMismatch,

    #[error("entry {index} is not on the unit circle (modulus {modulus})")]
    NotUnitModulus { index: usize, modulus: f64 },

    #[error("entry {index} violates the tangent condition (residual {residual:e})")]
    NotTangent { index: usize, residual: f64 },

    #[error("degenerate retraction: entry {index} has modulus {modulus:e}")]
    DegenerateRetraction { index: usize, modulus: f64 },

    #[error("degenerate scene: {0}")]
    DegenerateScene(String),

    #[error("steering vector is nearly orthogonal to the sequence: |s^H s~| = {value:e} < {threshold:e}")]
    NearOrthogonalSteering { value: f64, threshold: f64 },

    #[error("outer iteration {iteration}: {source}")]
    OuterIteration {
        iteration: usize,
        #[source]
        source: Box<Error>,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn at_outer(self, iteration: usize) -> Self {
        Error::OuterIteration {
            iteration,
            source: Box::new(self),
        }
    }
}
