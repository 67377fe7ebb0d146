use thiserror::Error;

use crate::equilibrium::EquilibriumState;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("dimension mismatch for {what}: expected {expected}, got {got}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("rotation too large for twist differencing (angle {angle} rad)")]
    RotationTooLarge { angle: f64 },

    #[error("chain description error in {element}: {message}")]
    Parse { element: String, message: String },

    #[error("unreachable or singular target after {iterations} iterations (pose error {error:.3e})")]
    Unreachable { iterations: usize, error: f64 },

    #[error("kinematic singularity at iterate {iteration} (condition estimate {condition:.3e})")]
    KinematicSingularity { iteration: usize, condition: f64 },

    #[error("no equilibrium found after {restarts} restarts (best pose residual {:.3e})", best.residual_pose)]
    NoEquilibrium {
        restarts: usize,
        best: Box<EquilibriumState>,
    },

    #[error("singular configuration: {0}")]
    SingularConfiguration(String),

    #[error("frame mismatch between chains: pose disagreement {0:.3e}")]
    FrameMismatch(f64),

    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub(crate) fn parse(element: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Parse {
            element: element.into(),
            message: message.into(),
        }
    }
}

pub(crate) fn check_len(what: &'static str, expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::DimensionMismatch {
            what,
            expected,
            got,
        })
    }
}
