use alloc::string::String;
use core::fmt;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// A parameter lies outside its admissible range.
    InvalidInput(String),
    /// Two objects that must share a size do not.
    DimensionMismatch { expected: usize, found: usize },
    /// The coefficient family does not satisfy its ellipticity bounds.
    Ellipticity(String),
    /// An iterative solver stopped before reaching its tolerance.
    NotConverged { iterations: usize, residual: f64 },
    /// Adaptive quadrature could not reach the requested accuracy.
    Quadrature { estimate: f64, error: f64 },
    /// Dense decomposition requested above the configured size cap.
    SizeOverCap { size: usize, cap: usize },
    NotSymmetric { max_asymmetry: f64 },
    /// A reduced system is singular (for instance an empty interior).
    Singular(String),
    /// A function of the operator is not finite on the spectrum.
    NonFinite(String),
    Unsupported(String),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::InvalidInput(msg) => write!(f, "invalid input: {msg}"),
            Error::DimensionMismatch { expected, found } => {
                write!(f, "dimension mismatch: expected {expected}, found {found}")
            }
            Error::Ellipticity(msg) => write!(f, "ellipticity violated: {msg}"),
            Error::NotConverged { iterations, residual } => write!(
                f,
                "solver did not converge after {iterations} iterations (relative residual {residual:e})"
            ),
            Error::Quadrature { estimate, error } => write!(
                f,
                "quadrature did not converge (estimate {estimate:e}, error bound {error:e})"
            ),
            Error::SizeOverCap { size, cap } => {
                write!(f, "dense decomposition of size {size} exceeds cap {cap}")
            }
            Error::NotSymmetric { max_asymmetry } => {
                write!(f, "operator is not symmetric (max |L - L^T| = {max_asymmetry:e})")
            }
            Error::Singular(msg) => write!(f, "singular system: {msg}"),
            Error::NonFinite(msg) => write!(f, "non-finite value: {msg}"),
            Error::Unsupported(msg) => write!(f, "unsupported: {msg}"),
        }
    }
}

impl core::error::Error for Error {}

macro_rules! invalid {
    ($($arg:tt)*) => {
        $crate::error::Error::InvalidInput(alloc::format!($($arg)*))
    };
}
pub(crate) use invalid;
