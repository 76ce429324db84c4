use alloc::string::String;
use core::fmt;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// A parameter is non-finite or outside its admissible range.
    InvalidParameter(String),
    /// The parameters fall in a regime the closed forms do not cover.
    UnsupportedRegime(String),
    /// A time, index or path falls outside the domain of the operation.
    Domain(String),
    /// The parameters hit a removable-guard condition (division by zero in a closed form).
    DegenerateParameters(String),
    /// The boundary system of the mean-inventory problem is singular.
    DegenerateBvp(String),
    /// The microstructure kernel cannot be reduced to a time-only kernel.
    UnsupportedKernel(String),
    /// Invalid simulation or analysis configuration.
    Configuration(String),
    /// Ratio with a zero denominator.
    UndefinedRatio(String),
    /// No book snapshot at or before the window start.
    MissingSeed { window: usize },
    /// Fewer observations than regressors.
    Underdetermined { n: usize, p: usize },
    /// A midprice of zero makes the relative difference undefined.
    ZeroMidprice { index: usize },
    /// Two inputs that must share a shape or grid do not.
    ShapeMismatch(String),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::InvalidParameter(m) => write!(f, "invalid parameter: {m}"),
            Error::UnsupportedRegime(m) => write!(f, "unsupported regime: {m}"),
            Error::Domain(m) => write!(f, "domain error: {m}"),
            Error::DegenerateParameters(m) => write!(f, "degenerate parameters: {m}"),
            Error::DegenerateBvp(m) => write!(f, "degenerate boundary-value problem: {m}"),
            Error::UnsupportedKernel(m) => write!(f, "unsupported kernel: {m}"),
            Error::Configuration(m) => write!(f, "configuration error: {m}"),
            Error::UndefinedRatio(m) => write!(f, "undefined ratio: {m}"),
            Error::MissingSeed { window } => {
                write!(f, "no book snapshot at or before the start of window {window}")
            }
            Error::Underdetermined { n, p } => {
                write!(f, "underdetermined regression: {n} observations for {p} regressors")
            }
            Error::ZeroMidprice { index } => write!(f, "midprice is zero at index {index}"),
            Error::ShapeMismatch(m) => write!(f, "shape mismatch: {m}"),
        }
    }
}

impl core::error::Error for Error {}
