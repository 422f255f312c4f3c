//! Kernel training: quantum kernel alignment over the encoding angles and
//! metric learning of the Gaussian transform.

mod embedding;
mod mlkrr;
mod qka;
mod spsa;

pub use embedding::{export_embedding, EmbeddingArtifact, TaskKind};
pub use mlkrr::{mlkrr_fit, mlkrr_gradient, mlkrr_loss, MlkrrConfig, MlkrrResult};
pub use qka::{qka_align, svc_loss, AlignmentState, SvcLoss, TraceEntry};
pub use spsa::{rademacher, spsa_gradient, spsa_probe, SpsaConfig, SpsaProbe};
