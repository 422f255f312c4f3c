//! Pretrained embeddings handed from the pretraining stage to downstream models.

use serde::{Deserialize, Serialize};

use super::qka::AlignmentState;
use crate::error::{Error, Result};
use crate::featuremap::{FeatureMapSpec, ParamVector};
use crate::qkernel::KernelEngineConfig;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskKind {
    Classification,
    Regression,
    Clustering,
    DimensionReduction,
}

impl TaskKind {
    /// Whether an embedding pretrained on `self` may be reused for `downstream`.
    ///
    /// | pretraining         | downstream                   |
    /// |---------------------|------------------------------|
    /// | classification      | classification               |
    /// | regression          | regression                   |
    /// | clustering          | classification or regression |
    /// | dimension reduction | classification or regression |
    pub fn matches(self, downstream: TaskKind) -> bool {
        use TaskKind::*;
        match self {
            Classification => downstream == Classification,
            Regression => downstream == Regression,
            Clustering | DimensionReduction => matches!(downstream, Classification | Regression),
        }
    }
}

/// The fixed encoding `λ*` plus enough metadata to rebuild the kernel exactly.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingArtifact {
    /// Engine settings with `params` set to `λ_best`.
    pub kernel: KernelEngineConfig,
    pub loss_init: f64,
    pub loss_best: f64,
    pub iterations: usize,
    pub task: TaskKind,
    pub seed: u64,
}

impl EmbeddingArtifact {
    pub fn feature_map(&self) -> &FeatureMapSpec {
        &self.kernel.feature_map
    }

    pub fn params(&self) -> &ParamVector {
        &self.kernel.params
    }

    pub fn kernel_config(&self) -> KernelEngineConfig {
        self.kernel.clone()
    }
}

/// Freezes `λ_best` from an alignment run. The angles in `base` are replaced.
pub fn export_embedding(
    state: &AlignmentState,
    base: &KernelEngineConfig,
    task: TaskKind,
    seed: u64,
) -> Result<EmbeddingArtifact> {
    if state.trace.is_empty() {
        return Err(Error::State("alignment state has no evaluated loss".into()));
    }
    let kernel = base.with_params(state.params_best.clone());
    kernel.validate()?;
    Ok(EmbeddingArtifact {
        kernel,
        loss_init: state.loss_init,
        loss_best: state.loss_best,
        iterations: state.iteration,
        task,
        seed,
    })
}
