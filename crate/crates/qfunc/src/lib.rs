//! Std side of `qfunc-core`: a parallel experiment runner that reproduces
//! the sequential reference bit for bit, CSV/JSON reports, sample input
//! parsing and the `qfunc` command line.

pub mod cli;
pub mod input;
pub mod report;
pub mod runner;

pub use qfunc_core as core;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Core(#[from] qfunc_core::Error),
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("malformed input: {0}")]
    Input(String),
    #[error("bad config: {0}")]
    Config(String),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: &std::path::Path, source: std::io::Error) -> Self {
        Error::Io { path: path.display().to_string(), source }
    }
}
