use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("malformed dependency parse at token {token}: {reason}")]
    MalformedParse { token: usize, reason: String },

    #[error("CoNLL-U line {line}: {reason}")]
    Conllu { line: usize, reason: String },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("shape mismatch: expected {expected}, got {got}")]
    Shape { expected: String, got: String },

    #[error("empty concept set: the sample has no classifier target")]
    EmptyPresentSet,

    #[error("non-finite value in {what}{}", iteration.map(|i| format!(" at iterate {i}")).unwrap_or_default())]
    NonFinite {
        what: String,
        iteration: Option<usize>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidInput(msg.into())
}
