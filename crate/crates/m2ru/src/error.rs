use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: byte {offset}: {detail}")]
    Idx { path: PathBuf, offset: u64, detail: String },
    #[error("{path}: line {line}: {detail}")]
    Features { path: PathBuf, line: u64, detail: String },
    #[error("config: {0}")]
    Config(String),
    #[error("{path}: checkpoint version {found} is not supported (this build reads version {expected})")]
    CheckpointVersion { path: PathBuf, found: u32, expected: u32 },
    #[error("{path}: checksum mismatch (stored {stored:#010x}, computed {computed:#010x})")]
    Checksum { path: PathBuf, stored: u32, computed: u32 },
    #[error("{path}: {detail}")]
    Checkpoint { path: PathBuf, detail: String },
    #[error(transparent)]
    Core(#[from] m2ru_core::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub fn io_err(path: &std::path::Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.to_path_buf(),
        source,
    }
}
