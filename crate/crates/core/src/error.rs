use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

/// Errors raised by the core algorithms.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// Two operands had incompatible shapes.
    ShapeMismatch {
        op: &'static str,
        left: (usize, usize),
        right: (usize, usize),
    },
    /// A caller broke an operation's precondition.
    Contract(String),
    /// A handover record violates its structural invariants.
    InvalidRecord(String),
    /// The giver/taker grip difference never crosses downward.
    NoCrossing,
    /// The grip difference changes sign more than once; holds every
    /// index at which a sign change lands.
    AmbiguousCrossing(Vec<usize>),
    /// A normalization channel has zero (or non-finite) spread.
    DegenerateChannel(&'static str),
    /// Synthetic parameters cannot produce a usable record.
    Generation(String),
}

pub type Result<T> = core::result::Result<T, Error>;

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::ShapeMismatch { op, left, right } => write!(
                f,
                "{op}: shape mismatch {}x{} vs {}x{}",
                left.0, left.1, right.0, right.1
            ),
            Error::Contract(msg) => write!(f, "contract violation: {msg}"),
            Error::InvalidRecord(msg) => write!(f, "invalid record: {msg}"),
            Error::NoCrossing => write!(f, "alignment: grip forces never cross"),
            Error::AmbiguousCrossing(idx) => {
                write!(f, "alignment: multiple grip sign changes at indices {idx:?}")
            }
            Error::DegenerateChannel(ch) => {
                write!(f, "normalization: channel {ch} has zero variance")
            }
            Error::Generation(msg) => write!(f, "synthetic generation: {msg}"),
        }
    }
}

impl core::error::Error for Error {}

pub(crate) fn contract(msg: impl Into<String>) -> Error {
    Error::Contract(msg.into())
}
