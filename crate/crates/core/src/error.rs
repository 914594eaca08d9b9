use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid {what}: {reason}")]
    Validation { what: &'static str, reason: String },

    #[error("dimension mismatch in {what}: expected {expected}, got {got}")]
    Dimension {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("reward {value} for action {action} lies outside [0, {bound}]")]
    RewardRange {
        action: usize,
        value: f64,
        bound: f64,
    },

    #[error("{kind} family over {num_actions} actions exceeds the enumeration cap of {cap}")]
    Capacity {
        kind: &'static str,
        num_actions: usize,
        cap: usize,
    },

    #[error("fixed-point solver stalled with residual {residual:e} after {iterations} iterations")]
    Solver { residual: f64, iterations: usize },
}

impl Error {
    pub(crate) fn invalid(what: &'static str, reason: impl Into<String>) -> Self {
        Error::Validation {
            what,
            reason: reason.into(),
        }
    }

    pub(crate) fn check_len(what: &'static str, expected: usize, got: usize) -> Result<()> {
        if expected == got {
            Ok(())
        } else {
            Err(Error::Dimension {
                what,
                expected,
                got,
            })
        }
    }
}
