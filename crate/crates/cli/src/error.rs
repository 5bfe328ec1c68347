use thiserror::Error;
use tunnel_core::TunnelError;

/// Everything that can stop a run, with its process exit code.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("parse error on line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("invalid value for `{key}`: {message}")]
    Validation { key: String, message: String },
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Physics(#[from] TunnelError),
}

impl CliError {
    /// 2 for anything the physics rejects (including out-of-domain
    /// parameters), 1 for input/output and syntax problems.
    pub fn exit_code(&self) -> u8 {
        match self {
            Self::Validation { .. } | Self::Physics(_) => 2,
            Self::Usage(_) | Self::Parse { .. } | Self::Io { .. } => 1,
        }
    }
}
