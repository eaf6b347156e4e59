use thiserror::Error;

use crate::steady::SteadyState;

pub type Result<T, E = EhdError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum EhdError {
    #[error("contract violation: {0}")]
    Contract(String),

    #[error("{solver} did not converge in {iterations} iterations (residual {residual:.3e})")]
    Convergence {
        solver: &'static str,
        iterations: usize,
        residual: f64,
    },

    #[error("incompatible Neumann right-hand side: net source {net:.3e} exceeds {limit:.3e}")]
    Compatibility { net: f64, limit: f64 },

    #[error("domain error: {0}")]
    Domain(String),

    #[error(
        "steady-state line search stalled after {iterations} iterations (residual {residual:.3e})"
    )]
    LineSearchStalled {
        iterations: usize,
        residual: f64,
        best: Box<SteadyState>,
    },

    #[error("invariant violated: {0}")]
    Invariant(String),

    #[error("config error{}: key `{key}`: {message}", line.map(|l| format!(" at line {l}")).unwrap_or_default())]
    Config {
        key: String,
        line: Option<usize>,
        message: String,
    },

    #[error("step {step}: {source}")]
    Step {
        step: u64,
        #[source]
        source: Box<EhdError>,
    },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed {what}: {message}")]
    Format { what: String, message: String },
}

impl EhdError {
    pub(crate) fn config(
        key: impl Into<String>,
        line: Option<usize>,
        msg: impl Into<String>,
    ) -> Self {
        Self::Config {
            key: key.into(),
            line,
            message: msg.into(),
        }
    }

    pub(crate) fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Self::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }

    /// Process exit code: 2 config, 3 solver/numerics, 4 I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Config { .. } => 2,
            Self::Io { .. } | Self::Format { .. } => 4,
            Self::Step { source, .. } => source.exit_code(),
            _ => 3,
        }
    }

    /// Short machine-readable category.
    pub fn kind(&self) -> &'static str {
        match self {
            Self::Contract(_) => "contract",
            Self::Convergence { .. } => "convergence",
            Self::Compatibility { .. } => "compatibility",
            Self::Domain(_) => "domain",
            Self::LineSearchStalled { .. } => "line_search_stalled",
            Self::Invariant(_) => "invariant",
            Self::Config { .. } => "config",
            Self::Step { source, .. } => source.kind(),
            Self::Io { .. } => "io",
            Self::Format { .. } => "format",
        }
    }
}
