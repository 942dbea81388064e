use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Parameter validation failure. The message names the violated invariant.
#[derive(Debug, Clone, PartialEq, Error)]
#[error("{context}: {message}")]
pub struct InvalidParam {
    pub context: String,
    pub message: String,
}

impl InvalidParam {
    pub fn new(context: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            context: context.into(),
            message: message.into(),
        }
    }
}

/// Configuration text could not be turned into a valid configuration.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigError {
    #[error("syntax error: {0}")]
    Syntax(String),
    #[error("unknown key `{key}`{}", suggestion.as_ref().map(|s| format!(" (did you mean `{s}`?)")).unwrap_or_default())]
    UnknownKey { key: String, suggestion: Option<String> },
    #[error("`{key}` has the wrong type: expected {expected}")]
    WrongType { key: String, expected: &'static str },
    #[error("`{key}` is out of range: {invariant}")]
    OutOfRange { key: String, invariant: String },
    #[error("`{first}` and `{second}` are inconsistent: {message}")]
    CrossField {
        first: String,
        second: String,
        message: String,
    },
    #[error("cannot resolve configuration `{0}`: not a shipped scenario and not a readable file")]
    NotFound(String),
}

/// Failure of a simulation or analysis run.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error(transparent)]
    Invalid(#[from] InvalidParam),
    #[error("event bisection did not converge within {max_bisections} halvings near t = {time:e} s (event tolerance {tolerance:e} s is below numeric resolution)")]
    BisectionDiverged {
        time: f64,
        tolerance: f64,
        max_bisections: u32,
    },
    #[error("state became non-finite at t = {time:e} s; fastest time constant is {name} = {tau:e} s against dt = {dt:e} s")]
    NonFinite {
        time: f64,
        name: &'static str,
        tau: f64,
        dt: f64,
    },
    #[error("singular companion matrix (determinant {det:e}) for step {dt:e} s")]
    SingularCompanion { det: f64, dt: f64 },
    #[error("device parameter resampling failed: r_off > r_on not satisfied after {attempts} attempts")]
    Resample { attempts: u32 },
    #[error("measurement failed: {0}")]
    Measurement(String),
}

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Invalid(#[from] InvalidParam),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}
