use std::path::PathBuf;

use thiserror::Error;

use crate::weights::WeightError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("non-finite input: {0}")]
    NonFinite(String),

    #[error("invalid subgradient: sup-norm {norm} exceeds 1")]
    InvalidSubgradient { norm: f64 },

    #[error(transparent)]
    Weights(#[from] WeightError),

    #[error(
        "inner solver did not converge{}: primal residual {primal:.3e} (tol {tol_primal:.3e}), \
         dual residual {dual:.3e} (tol {tol_dual:.3e}) after {iterations} iterations",
        channel.map(|c| format!(" on channel {c}")).unwrap_or_default()
    )]
    NotConverged {
        channel: Option<usize>,
        primal: f64,
        dual: f64,
        tol_primal: f64,
        tol_dual: f64,
        iterations: usize,
    },

    #[error("dual variable violates its norm bound by {excess:.3e} on channel {channel}")]
    DualNormViolation { channel: usize, excess: f64 },

    #[error("Poisson right-hand side is incompatible: sum {sum:.3e} vs l1 norm {l1:.3e}")]
    IncompatiblePoisson { sum: f64, l1: f64 },

    #[error("{path}: {source}")]
    Image {
        path: PathBuf,
        source: image::ImageError,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("malformed diagnostics: {0}")]
    Diagnostics(String),
}

impl Error {
    /// Whether the error comes from the numerics rather than from bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::NotConverged { .. }
                | Error::DualNormViolation { .. }
                | Error::IncompatiblePoisson { .. }
        )
    }

    pub(crate) fn on_channel(self, index: usize) -> Self {
        match self {
            Error::NotConverged {
                primal,
                dual,
                tol_primal,
                tol_dual,
                iterations,
                ..
            } => Error::NotConverged {
                channel: Some(index),
                primal,
                dual,
                tol_primal,
                tol_dual,
                iterations,
            },
            other => other,
        }
    }
}
