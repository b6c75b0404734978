use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("grid sizing: {0}")]
    Sizing(String),

    #[error("shape mismatch: expected {expected} values, got {got}")]
    Shape { expected: usize, got: usize },

    #[error("validation: {0}")]
    Validation(String),

    #[error("invalid profile parameter: {0}")]
    Profile(String),

    #[error(
        "resolution insufficient for the {family} profile: spectral tail is {tail:.3e} of peak"
    )]
    Resolution { family: String, tail: f64 },

    #[error("time step {dt} exceeds the CFL bound {bound}")]
    StepSize { dt: f64, bound: f64 },

    #[error("non-finite coefficients; last valid time t = {last_valid_t}")]
    BlowUp { last_valid_t: f64 },

    #[error(
        "velocity for stage {stage} requested at t = {requested}, provider holds t = {available}"
    )]
    Sync {
        stage: usize,
        requested: f64,
        available: f64,
    },

    #[error("fit: {0}")]
    Fit(String),

    #[error("config field `{field}`: {message}")]
    Config { field: String, message: String },

    #[error("io: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn config(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            message: message.into(),
        }
    }
}
