use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("usage: {0}")]
    Usage(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("verdict failed: {0}")]
    Verdict(String),
    #[error("io error on {path}: {source}")]
    Io { path: String, source: std::io::Error },
}

impl CliError {
    /// 0 success, 1 numerical or verdict failure, 2 usage or configuration error.
    pub fn exit_code(&self) -> u8 {
        match self {
            Self::Usage(_) | Self::Config(_) => 2,
            Self::Numerical(_) | Self::Verdict(_) | Self::Io { .. } => 1,
        }
    }
}
