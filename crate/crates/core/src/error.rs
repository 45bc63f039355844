use alloc::boxed::Box;
use core::fmt;

/// Errors raised by the core algorithms.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// An argument violated its precondition.
    InvalidArgument {
        name: &'static str,
        reason: &'static str,
    },
    /// A sample, state or loss value was NaN or infinite.
    NonFinite(&'static str),
    /// A spike template would run past the end of the recording.
    SpikeOutOfRange { index: usize },
    /// Threshold calibration could not reach the requested sparsity.
    CalibrationUnreachable { target: f64, best: f64 },
    /// Two arrays that must agree in shape did not.
    ShapeMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },
    /// Input that must be sorted was not.
    Unsorted(&'static str),
    /// Not enough labeled material to build a training set.
    InsufficientData { needed: usize, found: usize },
    /// Training loss stopped being finite.
    Diverged { epoch: usize },
    /// A pulse train cannot be inverted.
    NotInvertible,
    /// All metric denominators were zero.
    UndefinedMetrics,
    /// A pipeline stage failed.
    Stage {
        stage: &'static str,
        source: Box<Error>,
    },
}

impl Error {
    pub fn in_stage(self, stage: &'static str) -> Self {
        Error::Stage {
            stage,
            source: Box::new(self),
        }
    }
}

pub type Result<T> = core::result::Result<T, Error>;

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::InvalidArgument { name, reason } => write!(f, "invalid `{name}`: {reason}"),
            Error::NonFinite(what) => write!(f, "non-finite value in {what}"),
            Error::SpikeOutOfRange { index } => {
                write!(f, "spike {index} would extend past the end of the recording")
            }
            Error::CalibrationUnreachable { target, best } => write!(
                f,
                "target sparsity {target} unreachable (closest achieved {best})"
            ),
            Error::ShapeMismatch {
                what,
                expected,
                found,
            } => write!(f, "{what}: expected length {expected}, found {found}"),
            Error::Unsorted(what) => write!(f, "{what} must be sorted ascending"),
            Error::InsufficientData { needed, found } => write!(
                f,
                "need at least {needed} positive examples, found {found}"
            ),
            Error::Diverged { epoch } => write!(f, "training loss became non-finite at epoch {epoch}"),
            Error::NotInvertible => {
                f.write_str("reset-to-baseline pulse trains cannot be reconstructed")
            }
            Error::UndefinedMetrics => f.write_str("tp, fp and fn are all zero"),
            Error::Stage { stage, source } => write!(f, "{stage}: {source}"),
        }
    }
}

impl core::error::Error for Error {}

pub(crate) fn invalid(name: &'static str, reason: &'static str) -> Error {
    Error::InvalidArgument { name, reason }
}
