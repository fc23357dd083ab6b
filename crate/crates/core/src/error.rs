use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TextError {
    #[error("document has no sentences")]
    EmptyDocument,
}

#[derive(Debug, Error)]
pub enum LmError {
    #[error("training corpus is empty")]
    EmptyCorpus,
    #[error("bad interpolation weights: {0}")]
    BadWeights(String),
    #[error("unsupported model version header {0:?}")]
    UnsupportedVersion(String),
    #[error("malformed model file at line {line}: {message}")]
    Malformed { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Failure reported by a [`crate::lm::Scorer`] backend.
#[derive(Debug, Error, Clone, PartialEq)]
#[error("scorer failure: {0}")]
pub struct ScorerError(pub String);

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AttackError {
    #[error("invalid modification config: {0}")]
    BadConfig(String),
    #[error("not enough negations to delete: {available} available")]
    InsufficientNegations { available: usize },
    #[error("no eligible insertion positions")]
    NoEligiblePositions,
    #[error("token {0} is not an eligible insertion position")]
    IneligiblePosition(usize),
    #[error("requested {requested} insertions but only {available} candidate positions")]
    InsufficientCandidates { requested: usize, available: usize },
    #[error("edit log does not apply to text: {0}")]
    BadEdit(String),
    #[error(transparent)]
    Scorer(#[from] ScorerError),
}

/// Failure reported by a [`crate::extension::Generator`] backend.
#[derive(Debug, Error, Clone, PartialEq)]
#[error("generator unavailable: {0}")]
pub struct GeneratorError(pub String);

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ExtensionError {
    #[error("question is empty")]
    EmptyQuestion,
    #[error("generated text is empty")]
    EmptyGeneration,
    #[error("article needs at least 2 sentences, found {0}")]
    TooFewSentences(usize),
    #[error("article has {found} words, prefix needs {needed}")]
    ArticleTooShort { found: usize, needed: usize },
    #[error("invalid extension config: {0}")]
    BadConfig(String),
    #[error(transparent)]
    GeneratorUnavailable(#[from] GeneratorError),
    #[error("generator produced no sentences")]
    GeneratorEmpty,
    #[error("generator stopped producing text at machine fraction {reached:.4}")]
    GeneratorStalled { reached: f64 },
    #[error("token counts are both zero")]
    ZeroLength,
    #[error("real document has {real} words, fewer than the fake's {fake}")]
    RealTooShort { real: usize, fake: usize },
}

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("duplicate example id {0:?}")]
    DuplicateId(String),
    #[error("invariant violated by example {id:?}: {reason}")]
    InvariantViolation { id: String, reason: String },
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("eval fraction must lie strictly between 0 and 1, got {0}")]
    BadFraction(f64),
    #[error("line {line}: {message}")]
    SchemaError { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EvalError {
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("no examples to evaluate")]
    Empty,
    #[error("both classes must be present")]
    SingleClass,
    #[error("score {0} is not a finite number")]
    InvalidScore(f64),
    #[error("value {value} outside binning range [0, {upper}]")]
    OutOfRange { value: f64, upper: f64 },
    #[error("bin count must be positive")]
    NoBins,
}
