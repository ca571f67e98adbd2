//! Error type shared across the crate.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// A sample grid is too coarse for the requested Fourier cutoff.
    #[error("insufficient resolution: {samples} samples cannot resolve cutoff {cutoff} (need at least {needed})")]
    InsufficientResolution {
        samples: usize,
        cutoff: usize,
        needed: usize,
    },

    /// Invalid density data (negative values, NaN, nonpositive mean, ...).
    #[error("invalid density: {0}")]
    InvalidDensity(String),

    /// A parameter outside its admissible range.
    #[error("invalid parameter {name}: {message}")]
    InvalidParameter { name: String, message: String },

    /// Hamiltonian assembly produced a non-Hermitian matrix. This is an
    /// internal consistency failure and the run must not continue.
    #[error("assembled form matrix is not Hermitian (max deviation {max_dev:.3e})")]
    NonHermitian { max_dev: f64 },

    /// The iterative eigensolver did not reach the residual target.
    #[error("eigensolver did not converge: {0}")]
    EigensolverFailure(String),

    /// Basis construction is impossible (e.g. more particles than orbitals).
    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("malformed input file: {0}")]
    Parse(String),
}

impl Error {
    pub fn parameter(name: &str, message: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name: name.to_string(),
            message: message.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
