use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path} is not usable text: {reason}")]
    Encoding { path: PathBuf, reason: String },

    #[error("document {doc_id} has boilerplate markers but an empty body")]
    EmptyBody { doc_id: String },

    #[error("lexicon {name}, line {line}: {reason}")]
    Lexicon { name: String, line: usize, reason: String },

    #[error("context cannot fit a budget of {budget} tokens: {required} tokens are irreducible")]
    BudgetImpossible { budget: usize, required: usize },

    #[error("{path}, row {row}: {reason}")]
    Parse { path: PathBuf, row: usize, reason: String },

    #[error("{path}, row {row}: {reason}")]
    Validation { path: PathBuf, row: usize, reason: String },

    #[error("record {record_id}: language {language:?} is not supported by the English rules")]
    UnsupportedLanguage { record_id: String, language: String },

    #[error("configuration: {0}")]
    Config(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
