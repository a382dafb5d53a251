//! Corpus distillation and instrumental verification for Kubernetes manifests.

pub mod context;
pub mod corpus;
pub mod manifest;
pub mod metrics;
pub mod representativeness;
pub mod teacher;
pub mod validate;

pub use context::{ContextModel, Family};
pub use manifest::{GroupVersionKind, ManifestDocument, ManifestPackage};
pub use validate::{run_circuit, FailureDetail, Level, ValidationReport};
