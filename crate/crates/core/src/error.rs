use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// An input lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A lumped element with a vanishing frequency or capacitance.
    #[error("singular impedance: {0}")]
    SingularImpedance(String),

    /// The S11 denominator vanished.
    #[error("S11 singular at {freq_hz} Hz")]
    Singular { freq_hz: f64 },

    #[error("non-finite result: {0}")]
    NonFinite(String),

    #[error("usage error: {0}")]
    Usage(String),

    #[error("no resonance in window")]
    NoResonance,

    #[error("calibration failure: {0}")]
    Calibration(String),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    /// Structured validation failure naming the offending key.
    #[error("invalid value for `{key}`: {msg}")]
    Validation { key: String, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn validation(key: impl Into<String>, msg: impl Into<String>) -> Self {
        Error::Validation {
            key: key.into(),
            msg: msg.into(),
        }
    }

    /// True for failures of the numerics (convergence, singularities), as
    /// opposed to bad inputs.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::Singular { .. }
                | Error::SingularImpedance(_)
                | Error::NonFinite(_)
                | Error::NoResonance
                | Error::Calibration(_)
        )
    }

    /// Attach a frequency to errors raised while evaluating a model.
    pub fn at_frequency(self, freq_hz: f64) -> Self {
        match self {
            Error::Singular { .. } => Error::Singular { freq_hz },
            Error::NonFinite(m) => Error::NonFinite(format!("{m} (at {freq_hz} Hz)")),
            Error::SingularImpedance(m) => {
                Error::SingularImpedance(format!("{m} (at {freq_hz} Hz)"))
            }
            Error::Domain(m) => Error::Domain(format!("{m} (at {freq_hz} Hz)")),
            other => other,
        }
    }
}
