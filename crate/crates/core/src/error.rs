use thiserror::Error;

use crate::TokenId;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("operation requires a static automaton")]
    NotStatic,
    #[error("automaton is frozen; it can no longer be modified")]
    Frozen,
    #[error("automaton is not frozen; call init_topk first")]
    NotFrozen,
    #[error("top-k fan-out must be at least 1")]
    ZeroTopK,
    #[error("separator token {sep} occurs inside document {doc} at offset {offset}")]
    SeparatorCollision { sep: TokenId, doc: usize, offset: usize },
    #[error("bad magic bytes, not a .samd file")]
    BadMagic,
    #[error("unsupported format version {found} (expected {expected})")]
    UnsupportedVersion { found: u32, expected: u32 },
    #[error("truncated input: needed {needed} bytes at offset {offset}")]
    Truncated { offset: usize, needed: usize },
    #[error("corrupt automaton: {0}")]
    Corrupt(String),
    #[error("unknown word {0:?} in frozen vocabulary")]
    UnknownWord(String),
    #[error("invalid token id {0:?}")]
    InvalidTokenId(String),
    #[error("vocabulary mode {0:?} cannot tokenize text")]
    UnsupportedMode(&'static str),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("oracle failed: {0}")]
    Oracle(String),
    #[error("i/o error on {path}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }
}
