use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("invalid config at `{path}`: {message}")]
    Config { path: String, message: String },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("method {method}: {source}")]
    Method {
        method: &'static str,
        #[source]
        source: debias_core::Error,
    },
    #[error(transparent)]
    Core(#[from] debias_core::Error),
    #[error("report does not match its schema: {0}")]
    Schema(String),
    #[error("{0}")]
    Prepare(String),
}
