use thiserror::Error;

use crate::tomography::{CoefficientFit, ReconstructionResult};

#[derive(Debug, Error)]
pub enum Error {
    #[error("grid too coarse: {n_pixels} pixels per axis cannot resolve l = {l} (need at least {required})")]
    Resolution {
        l: i32,
        n_pixels: usize,
        required: usize,
    },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid input: {0}")]
    Input(String),

    #[error("invalid state: {0}")]
    Validity(String),

    #[error("dark projection: analyzer {analyzer} has vanishing probability {prob:e}")]
    DarkProjection { analyzer: String, prob: f64 },

    #[error("unsupported mode: {0}")]
    UnsupportedMode(String),

    #[error("coefficient fit did not converge in any restart (best residual {:e})", .0.residual)]
    FitNonConvergence(Box<CoefficientFit>),

    #[error("density reconstruction did not converge (best log-likelihood {:.6}, gradient norm {grad_norm:e})", .best.log_likelihood)]
    ReconstructionNonConvergence {
        best: Box<ReconstructionResult>,
        grad_norm: f64,
    },

    #[error("malformed {what}: {detail}")]
    Format { what: &'static str, detail: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn format(what: &'static str, detail: impl Into<String>) -> Self {
        Error::Format {
            what,
            detail: detail.into(),
        }
    }

    /// True for failures of the numerical optimizers.
    pub fn is_non_convergence(&self) -> bool {
        matches!(
            self,
            Error::FitNonConvergence(_) | Error::ReconstructionNonConvergence { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
