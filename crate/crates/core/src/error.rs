use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("time {time} is not aligned with grid step {dt}")]
    Alignment { time: f64, dt: f64 },

    #[error("window error: {0}")]
    Window(String),

    /// The improper OU integral cannot be truncated to the requested tolerance
    /// on the available window.
    #[error("truncation tolerance {requested:e} not reachable, best achievable is {achievable:e}")]
    Truncation { requested: f64, achievable: f64 },

    #[error("non-finite value in field `{field}` at node {node}")]
    NonFinite { field: &'static str, node: usize },

    #[error("time step {dt} exceeds stability bound {max_dt}")]
    Stability { dt: f64, max_dt: f64 },

    #[error("constraint ({constraint}) violated: {detail}")]
    Constraint {
        constraint: &'static str,
        detail: String,
    },

    #[error("solution blew up at t = {time} (max |state| = {max_abs:e})")]
    BlowUp { time: f64, max_abs: f64 },

    #[error("forcing is not admissible: {0}")]
    ForcingInadmissible(String),

    #[error("config error at `{path}`: {message}")]
    Config { path: String, message: String },

    #[error("config parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn precondition(msg: impl Into<String>) -> Self {
        Error::Precondition(msg.into())
    }

    /// Validation-class errors map to exit code 1 in the CLI; the rest are
    /// numerical or IO failures.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::Precondition(_)
                | Error::Alignment { .. }
                | Error::Constraint { .. }
                | Error::Config { .. }
                | Error::Parse { .. }
                | Error::Stability { .. }
                | Error::ForcingInadmissible(_)
                | Error::Window(_)
                | Error::Truncation { .. }
        )
    }
}
