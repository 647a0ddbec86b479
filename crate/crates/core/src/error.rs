use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum KacError {
    /// A state lies outside the state space (or on a killing boundary).
    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid argument: {0}")]
    Argument(String),

    /// A quadrature or series failed to reach a usable result.
    #[error("numeric error in {context}: residual {residual:e}")]
    Numeric { context: String, residual: f64 },

    #[error("infeasible: {0}")]
    Infeasible(String),

    #[error("series does not converge: successive ratio {ratio}")]
    Nonconvergent { ratio: f64 },

    #[error("configuration error{}: {message}", line.map(|l| format!(" (line {l})")).unwrap_or_default())]
    Config { line: Option<usize>, message: String },

    #[error("i/o error: {0}")]
    Io(String),
}

impl KacError {
    pub fn numeric(context: impl Into<String>, residual: f64) -> Self {
        KacError::Numeric {
            context: context.into(),
            residual,
        }
    }

    pub fn config(message: impl Into<String>) -> Self {
        KacError::Config {
            line: None,
            message: message.into(),
        }
    }
}

impl From<std::io::Error> for KacError {
    fn from(e: std::io::Error) -> Self {
        KacError::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, KacError>;
