use crate::vocab::TermId;
use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Failure modes across the pipeline. Variants carry enough context to name
/// the offending document, term, line, or file without re-reading inputs.
#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("line {line}: {message}")]
    MalformedLine { line: usize, message: String },

    #[error("line {line}: duplicate document id {id:?}")]
    DuplicateDocId { id: String, line: usize },

    #[error("document {id:?} produced no tokens")]
    EmptyDocument { id: String },

    #[error("corpus contains no documents")]
    EmptyCorpus,

    #[error("term {term:?} is registered in the vocabulary but never occurs in the corpus")]
    ZeroCountTerm { term: String },

    #[error("term id {} is outside the vocabulary (size {vocab_size})", id.0)]
    UnknownTerm { id: TermId, vocab_size: usize },

    #[error("word multiset is empty")]
    EmptyWordSet,

    #[error("invalid {name}: {value}")]
    InvalidParameter { name: &'static str, value: f64 },

    #[error("weight {index} is invalid: {value}")]
    InvalidWeight { index: usize, value: f64 },

    #[error("weights are empty or sum to zero")]
    DegenerateWeights,

    #[error("sampling vocabulary is empty after filtering")]
    EmptySamplingVocabulary,

    #[error("document {doc_id:?} has no sampleable terms")]
    EmptySupport { doc_id: String },

    #[error("document {doc_id:?}: {attempts} consecutive tied pairs, giving up")]
    TieExhausted { doc_id: String, attempts: u32 },

    #[error("vocabulary of size {vocab_size} leaves no replacement candidates")]
    NoReplacementCandidate { vocab_size: usize },

    #[error("{name} is not finite: {value}")]
    NonFiniteScore { name: &'static str, value: f64 },

    #[error("prediction at position {position} is malformed: {message}")]
    MalformedPrediction { position: usize, message: String },

    #[error("duplicate document id {id:?}")]
    DuplicateDoc { id: String },

    #[error("{count} run entries have no external score, first: ({qid}, {docid})")]
    MissingExternalScore { count: usize, qid: String, docid: String },

    #[error("query {qid:?} has no relevance judgments")]
    UnjudgedQuery { qid: String },

    #[error("no query in the run has relevance judgments")]
    NoJudgedQueries,

    #[error("cannot split {queries} queries into {folds} folds")]
    TooFewQueries { queries: usize, folds: usize },

    #[error("duplicate query id {id:?}")]
    DuplicateQueryId { id: String },

    #[error("unknown metric {name:?} (expected e.g. \"p@20\" or \"ndcg@20\")")]
    UnknownMetric { name: String },

    #[error("{path}: missing or malformed manifest header: {message}")]
    MissingHeader { path: String, message: String },

    #[error("{path}: expected a {expected:?} artifact, found {found:?}")]
    WrongStage {
        path: String,
        expected: String,
        found: String,
    },

    #[error("corpus checksum mismatch ({context}): expected {expected}, found {found}")]
    ChecksumMismatch {
        context: String,
        expected: String,
        found: String,
    },

    #[error("inconsistent artifacts: {0}")]
    InconsistentArtifacts(String),
}
