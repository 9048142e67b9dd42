use alloc::string::String;

/// Errors raised by the algorithmic core.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("line {line}: unterminated {what}")]
    Unterminated { what: &'static str, line: usize },
    #[error("{0}")]
    InvalidBundle(String),
    #[error("no subject lines: bundle has no changed files")]
    NoSubjectLines,
    #[error("bundle {0} has no unchanged file to train on")]
    NoTrainingData(String),
    #[error("window budget must be at least 3, got {0}")]
    BudgetTooSmall(usize),
    #[error("mask site index {0} is out of range")]
    SiteOutOfRange(usize),
    #[error("k must be within 1..=5, got {0}")]
    KOutOfRange(usize),
    #[error("k = {k} exceeds the {available} available propositions")]
    NotEnoughPropositions { k: usize, available: usize },
    #[error("embeddings not requested")]
    MissingEmbeddings,
    #[error("cosine undefined for a zero vector")]
    ZeroVector,
    #[error("embedding dimensions differ: {0} vs {1}")]
    DimensionMismatch(usize, usize),
    #[error("no mask site matches prediction for {0}")]
    UnmatchedRecord(String),
    #[error("empty score list")]
    EmptyScores,
    #[error("entropy undefined for nonpositive score")]
    EntropyUndefined,
    #[error("cosine score absent for {0}")]
    CosineAbsent(String),
    #[error("no usable training lines")]
    EmptyCorpus,
    #[error("vocabulary is empty")]
    EmptyVocab,
    #[error("{0}")]
    InvalidArgument(String),
}

pub type Result<T, E = Error> = core::result::Result<T, E>;
