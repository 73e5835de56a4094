use thiserror::Error;

/// Errors produced by the restoration library.
#[derive(Debug, Error)]
pub enum SatvError {
    /// A parameter or combination of parameters is outside its admissible range.
    #[error("invalid configuration: {0}")]
    Config(String),

    /// Two fields that must share a grid do not.
    #[error("shape mismatch: expected {expected:?}, got {got:?}")]
    ShapeMismatch {
        expected: (usize, usize),
        got: (usize, usize),
    },

    /// A solver field picked up a NaN or infinity; the iterate is named so the
    /// failure can be located.
    #[error("non-finite value in `{field}` at iteration {iteration}")]
    NonFinite {
        field: &'static str,
        iteration: usize,
    },

    /// The Fourier-domain denominator lost positivity (only possible with a
    /// degenerate parameter combination).
    #[error("spectral denominator not positive: min entry {min}")]
    DenominatorNotPositive { min: f64 },

    /// Adaptive quadrature hit its refinement limit without meeting tolerance.
    #[error("quadrature did not converge within {max_depth} refinement levels")]
    QuadratureNonConvergence { max_depth: usize },
}

pub type Result<T> = std::result::Result<T, SatvError>;
