use alloc::string::String;

/// Errors raised by the detection core.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, got {actual}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        actual: usize,
    },
    #[error("configuration error: {0}")]
    Config(String),
    #[error("degenerate input: {0}")]
    DegenerateInput(&'static str),
    #[error("non-finite gradient in parameter {0}; training aborted")]
    NonFiniteGradient(usize),
    #[error("empty training set")]
    EmptyTrainingSet,
    #[error("metric undefined: {0}")]
    UndefinedMetric(&'static str),
    #[error("invalid schema: {0}")]
    Schema(String),
}

pub type Result<T, E = Error> = core::result::Result<T, E>;

pub(crate) fn check_dim(context: &'static str, expected: usize, actual: usize) -> Result<()> {
    if expected == actual {
        Ok(())
    } else {
        Err(Error::DimensionMismatch {
            context,
            expected,
            actual,
        })
    }
}
