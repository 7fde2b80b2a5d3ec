use thiserror::Error as ThisError;

/// Errors shared by every module.
#[derive(Debug, Clone, ThisError, PartialEq)]
pub enum Error {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("unsupported dimension N={0}: field computations support N in {{1, 2}}")]
    UnsupportedDimension(usize),
    #[error("resolution error: {0}")]
    Resolution(String),
    #[error(
        "optimizer did not converge after {evaluations} evaluations (best objective {best_value:e} at {best_point:?})"
    )]
    Optimization {
        evaluations: usize,
        best_value: f64,
        best_point: Vec<f64>,
    },
    #[error("degenerate quotient: distance to the manifold {0:e} is below 1e-9")]
    DegenerateQuotient(f64),
    #[error("positivity margin violated at epsilon {epsilon}; shrink epsilon")]
    ShrinkEpsilon { epsilon: f64 },
    #[error("positivity floor violated at tau {tau}: min grid value {min:e}")]
    Positivity { tau: f64, min: f64 },
    #[error("time step {dt:e} underflowed at tau {tau}")]
    Stiffness { tau: f64, dt: f64 },
    #[error("degenerate fit: {0}")]
    DegenerateFit(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    /// True for failures of the numerics rather than of the inputs.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::Resolution(_)
                | Error::Optimization { .. }
                | Error::DegenerateQuotient(_)
                | Error::ShrinkEpsilon { .. }
                | Error::Positivity { .. }
                | Error::Stiffness { .. }
                | Error::DegenerateFit(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
