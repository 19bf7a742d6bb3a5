use thiserror::Error;

/// Errors produced by the library.
///
/// Variants split into two families: invalid input or configuration
/// ([`Error::is_numerical`] is `false`) and numerical failures such as
/// eigensolver non-convergence or a circulant model that cannot be sampled.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("bandwidth W = {0} outside (0, 1]")]
    InvalidBandwidth(f64),

    #[error("taper count K = {k} outside [1, {max}]")]
    InvalidTaperCount { k: usize, max: usize },

    #[error("sample and tapers live on different domains")]
    DomainMismatch,

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("eigensolver did not converge for a {size}x{size} matrix (condition estimate {condition:.3e})")]
    NonConvergence { size: usize, condition: f64 },

    #[error("density is not even: imaginary residue {residue:.3e} at lag {lag:?}")]
    NotEven { residue: f64, lag: Vec<i64> },

    #[error("circulant model not samplable: eigenvalue {value:.3e} at frequency index {index:?}")]
    NotSamplable { value: f64, index: Vec<i64> },

    #[error("sampler output not real: imaginary residue {0:.3e}")]
    ComplexResidue(f64),

    #[error("scale tau = {tau} not admissible: C2 norm {c2_norm:.6} exceeds 1 (admissible ceiling {ceiling:.6})")]
    TauTooLarge { tau: f64, c2_norm: f64, ceiling: f64 },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// `true` for failures of the numerics rather than of the caller's input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::NonConvergence { .. }
                | Error::NotEven { .. }
                | Error::NotSamplable { .. }
                | Error::ComplexResidue(_)
        )
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
