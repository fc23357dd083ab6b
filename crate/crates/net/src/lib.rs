//! Network-facing parts of vforge: clients for out-of-process models and the
//! annotation service.

pub mod adapters;
pub mod annotation;
pub mod mock;
pub mod server;

pub use adapters::{
    AdapterError, ClientConfig, DetectorClient, DetectorResponse, HttpGenerator, RemoteScorer,
};
pub use annotation::{AnnotationStore, AnnotationTask, TaskKind, Verdict};
