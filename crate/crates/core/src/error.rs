use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// The input makes the requested quantity independent of the free
    /// parameter (e.g. a constant value vector has maximal entropy at every
    /// temperature).
    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("value out of range: {0}")]
    OutOfRange(String),

    #[error("invalid trajectory: {0}")]
    InvalidTrajectory(String),

    #[error("invalid batch: {0}")]
    InvalidBatch(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("not found: {0}")]
    NotFound(String),

    #[error("singular linear system")]
    Singular,
}

macro_rules! invalid {
    ($($arg:tt)*) => {
        $crate::Error::InvalidArgument(::alloc::format!($($arg)*))
    };
}
pub(crate) use invalid;
