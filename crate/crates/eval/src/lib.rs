//! Synthetic corpora with answer keys, and scoring of de-identified trees
//! against them.

pub mod calendar;
pub mod corpus;
pub mod key;
pub mod score;

use std::path::Path;

pub use corpus::{generate, write_corpus, Corpus, CorpusSpec, PhiFamily};
pub use key::{AnswerKey, Expect, FileKey, FrameKey, KeyBox, KeyEntry, Label};
pub use score::{check_score, score_run, FailureCategory, Mismatch, PixelScore, ScoreReport};

#[derive(Debug, thiserror::Error)]
pub enum EvalError {
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("{0}")]
    Format(String),
    #[error("{path}: {msg}")]
    Parse { path: String, msg: String },
    #[error("output file missing for {0}")]
    MissingOutputFile(String),
    #[error("invalid corpus spec: {0}")]
    Spec(String),
}

impl EvalError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        EvalError::Io { path: path.display().to_string(), source }
    }
}
