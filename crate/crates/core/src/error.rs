use thiserror::Error;

/// Errors raised across the toolkit.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// Argument sits on a pole of the Gamma function.
    #[error("pole of the Gamma function at z = {re} + {im}i")]
    Pole { re: f64, im: f64 },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("degree {degree} exceeds the cap of {cap}")]
    CapExceeded { degree: usize, cap: usize },

    /// The adaptive integrator ran out of budget before certifying the tolerance.
    #[error("tolerance not met: achieved error {achieved:e} against target {target:e} after {evaluations} evaluations")]
    ToleranceNotMet {
        achieved: f64,
        target: f64,
        evaluations: usize,
    },

    #[error("operation requires a single gaussian width, found widths {0:?}")]
    MixedWidth(Vec<f64>),

    #[error("operation requires real coefficients")]
    NotReal,

    #[error("schedule has {len} points, at least {min} are required")]
    ScheduleTooShort { len: usize, min: usize },

    #[error("degenerate data: {0}")]
    DegenerateData(String),

    /// Malformed function-spec document.
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },

    /// Well-formed input that breaks an invariant.
    #[error("validation error: {0}")]
    Validation(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Stable machine-readable name of the variant.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Pole { .. } => "pole",
            Error::Domain(_) => "domain",
            Error::CapExceeded { .. } => "cap_exceeded",
            Error::ToleranceNotMet { .. } => "tolerance_not_met",
            Error::MixedWidth(_) => "mixed_width",
            Error::NotReal => "not_real",
            Error::ScheduleTooShort { .. } => "schedule_too_short",
            Error::DegenerateData(_) => "degenerate_data",
            Error::Parse { .. } => "parse",
            Error::Validation(_) => "validation",
        }
    }
}
