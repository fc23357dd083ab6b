//! Building blocks for verifying machine-generated misinformation attacks:
//! negation inversion, QA and vanilla article extension, labeled dataset
//! assembly and detector evaluation.

pub mod dataset;
pub mod error;
pub mod eval;
pub mod extension;
pub mod lm;
pub mod negation;
pub mod text;

pub use dataset::{Dataset, DatasetSplit, Label, LabeledExample, Meta, Scenario};
pub use error::{
    AttackError, DatasetError, EvalError, ExtensionError, GeneratorError, LmError, ScorerError,
    TextError,
};
pub use eval::{ConfusionMatrix, EvalReport};
pub use extension::{Generator, GeneratorRequest};
pub use lm::{NgramModel, Scorer};
pub use negation::{EditRecord, ModificationConfig, ModifiedArticle};
pub use text::{tokenize, Document, Span};
