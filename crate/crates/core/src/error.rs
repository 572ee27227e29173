use thiserror::Error;

/// Errors produced by the tomography toolkit.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("{name} = {value} is outside its domain: {constraint}")]
    Domain {
        name: &'static str,
        value: f64,
        constraint: &'static str,
    },

    #[error("need at least {required} samples, got {got}")]
    TooFewSamples { required: usize, got: usize },

    #[error("input is empty")]
    EmptyInput,

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("grid too coarse: spacing {spacing} exceeds {max_spacing}")]
    GridTooCoarse { spacing: f64, max_spacing: f64 },

    #[error("grid range too short: reaches {reach}, need at least {required}")]
    RangeTooShort { reach: f64, required: f64 },

    #[error("unsupported Fock index {n}, pattern functions exist for n <= {max}")]
    UnsupportedFockIndex { n: usize, max: usize },

    #[error("failed to converge after {iterations} iterations: {diagnostics}")]
    NonConvergence { iterations: usize, diagnostics: String },

    #[error("dataset format error at line {line}: {message}")]
    Format { line: usize, message: String },

    #[error("format version mismatch: expected {expected}, found {found}")]
    VersionMismatch { expected: String, found: String },

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(err: std::io::Error) -> Self {
        Error::Io(err.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_unit_interval(name: &'static str, value: f64) -> Result<()> {
    if (0.0..=1.0).contains(&value) {
        Ok(())
    } else {
        Err(Error::Domain {
            name,
            value,
            constraint: "must lie in [0, 1]",
        })
    }
}
