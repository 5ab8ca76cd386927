use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    /// A requested value lies outside what a monotone branch or profile can reach.
    #[error("range error: {message}{}", admissible.map(|(lo, hi)| format!(" (admissible interval [{lo}, {hi}])")).unwrap_or_default())]
    Range {
        message: String,
        admissible: Option<(f64, f64)>,
    },

    #[error("unsupported model '{model}': {reason}")]
    UnsupportedModel { model: String, reason: String },

    #[error("time step {tau} exceeds the stability bound {bound}")]
    CflViolation { tau: f64, bound: f64 },

    #[error("non-finite value in cell {cell} at step {step}")]
    NumericFault { cell: usize, step: u64 },

    #[error("characteristic overshoot |u| = {value} beyond the admissible bound; reduce ds")]
    StepSize { value: f64 },

    #[error("contract error: {0}")]
    Contract(String),

    #[error("invalid preset '{preset}': {reason}")]
    PresetInvalid { preset: String, reason: String },

    #[error("config error at line {line} (key `{key}`): {message}")]
    Config {
        key: String,
        line: usize,
        message: String,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }
}
