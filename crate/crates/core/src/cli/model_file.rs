//! JSON persistence for trained models and pretrained embeddings.

use std::fs;
use std::path::Path;

use nalgebra::DMatrix;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::classical_kernels::ClassicalKernel;
use crate::error::{Error, Result};
use crate::featuremap::ParamVector;
use crate::gram::{GramMatrix, Kernel};
use crate::kernel_methods::{KpcaModel, TrainedKRR, TrainedSVC, TrainedSVR};
use crate::qkernel::KernelEngineConfig;
use crate::training::{EmbeddingArtifact, TaskKind};

pub const FORMAT_VERSION: u64 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Svc,
    Krr,
    Svr,
    Kpca,
    Embedding,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum KernelDescriptor {
    Quantum {
        engine: KernelEngineConfig,
    },
    Classical {
        kernel: ClassicalKernel,
        /// Rows are scaled to unit norm before every kernel evaluation.
        unit_sphere: bool,
    },
}

impl KernelDescriptor {
    pub fn validate(&self) -> Result<()> {
        match self {
            KernelDescriptor::Quantum { engine } => engine.validate(),
            KernelDescriptor::Classical { kernel, .. } => kernel.validate(),
        }
    }

    pub fn unit_sphere(&self) -> bool {
        matches!(self, KernelDescriptor::Classical { unit_sphere: true, .. })
    }

    fn kernel(&self) -> &dyn Kernel {
        match self {
            KernelDescriptor::Quantum { engine } => engine,
            KernelDescriptor::Classical { kernel, .. } => kernel,
        }
    }

    /// Gram matrix on points already normalized as the descriptor requires.
    pub fn gram(&self, points: &[Vec<f64>]) -> Result<GramMatrix> {
        self.kernel().gram(points)
    }

    pub fn cross_gram(&self, test: &[Vec<f64>], train: &[Vec<f64>]) -> Result<DMatrix<f64>> {
        self.kernel().cross_gram(test, train)
    }
}

/// Provenance of an embedding produced by the pretraining stage.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Pretraining {
    pub task: TaskKind,
    pub loss_init: f64,
    pub loss_best: f64,
    pub iterations: usize,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SvcPayload {
    pub model: TrainedSVC,
    pub train_features: Vec<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KrrPayload {
    pub model: TrainedKRR,
    pub train_features: Vec<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SvrPayload {
    pub model: TrainedSVR,
    pub train_features: Vec<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KpcaPayload {
    pub model: KpcaModel,
    pub train_features: Vec<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingPayload {
    pub params_init: ParamVector,
    pub params_best: ParamVector,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelFile {
    pub format_version: u64,
    pub kind: ModelKind,
    pub kernel: KernelDescriptor,
    pub payload: Value,
    pub pretraining: Option<Pretraining>,
    pub seed: u64,
}

impl ModelFile {
    pub fn new<P: Serialize>(
        kind: ModelKind,
        kernel: KernelDescriptor,
        payload: &P,
        pretraining: Option<Pretraining>,
        seed: u64,
    ) -> Result<Self> {
        let file = ModelFile {
            format_version: FORMAT_VERSION,
            kind,
            kernel,
            payload: serde_json::to_value(payload).map_err(|e| Error::Format(e.to_string()))?,
            pretraining,
            seed,
        };
        file.validate()?;
        Ok(file)
    }

    pub fn from_embedding(e: &EmbeddingArtifact, params_init: ParamVector) -> Result<Self> {
        Self::new(
            ModelKind::Embedding,
            KernelDescriptor::Quantum {
                engine: e.kernel_config(),
            },
            &EmbeddingPayload {
                params_init,
                params_best: e.params().clone(),
            },
            Some(Pretraining {
                task: e.task,
                loss_init: e.loss_init,
                loss_best: e.loss_best,
                iterations: e.iterations,
                seed: e.seed,
            }),
            e.seed,
        )
    }

    pub fn to_embedding(&self) -> Result<EmbeddingArtifact> {
        self.expect_kind(ModelKind::Embedding)?;
        let KernelDescriptor::Quantum { engine } = &self.kernel else {
            return Err(Error::Format("kernel: embeddings need a quantum kernel".into()));
        };
        let info = self
            .pretraining
            .as_ref()
            .ok_or_else(|| Error::Format("pretraining: missing on embedding".into()))?;
        Ok(EmbeddingArtifact {
            kernel: engine.clone(),
            loss_init: info.loss_init,
            loss_best: info.loss_best,
            iterations: info.iterations,
            task: info.task,
            seed: info.seed,
        })
    }

    pub fn expect_kind(&self, kind: ModelKind) -> Result<()> {
        if self.kind != kind {
            return Err(Error::Format(format!("kind: expected {kind:?}, found {:?}", self.kind)));
        }
        Ok(())
    }

    pub fn payload<P: DeserializeOwned>(&self) -> Result<P> {
        serde_json::from_value(self.payload.clone()).map_err(|e| Error::Format(format!("payload: {e}")))
    }

    pub fn validate(&self) -> Result<()> {
        if self.format_version != FORMAT_VERSION {
            return Err(Error::Compatibility(format!(
                "format_version {} is not supported (expected {FORMAT_VERSION})",
                self.format_version
            )));
        }
        self.kernel.validate()?;
        match self.kind {
            ModelKind::Svc => {
                let p: SvcPayload = self.payload()?;
                check_train(p.model.alphas.len(), &p.train_features)
            }
            ModelKind::Krr => {
                let p: KrrPayload = self.payload()?;
                check_train(p.model.alphas.len(), &p.train_features)
            }
            ModelKind::Svr => {
                let p: SvrPayload = self.payload()?;
                check_train(p.model.coef.len(), &p.train_features)
            }
            ModelKind::Kpca => {
                let p: KpcaPayload = self.payload()?;
                check_train(p.model.train_col_means.len(), &p.train_features)
            }
            ModelKind::Embedding => {
                let p: EmbeddingPayload = self.payload()?;
                let KernelDescriptor::Quantum { engine } = &self.kernel else {
                    return Err(Error::Format("kernel: embeddings need a quantum kernel".into()));
                };
                if p.params_best != engine.params {
                    return Err(Error::Format(
                        "payload.params_best: differs from the kernel angles".into(),
                    ));
                }
                if self.pretraining.is_none() {
                    return Err(Error::Format("pretraining: missing on embedding".into()));
                }
                Ok(())
            }
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("model file serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let value: Value = serde_json::from_str(text).map_err(|e| Error::Format(e.to_string()))?;
        match value.get("format_version") {
            Some(v) if v.as_u64() == Some(FORMAT_VERSION) => {}
            Some(v) => {
                return Err(Error::Compatibility(format!(
                    "format_version {v} is not supported (expected {FORMAT_VERSION})"
                )))
            }
            None => return Err(Error::Format("missing field `format_version`".into())),
        }
        let file: ModelFile = serde_json::from_value(value).map_err(|e| Error::Format(e.to_string()))?;
        file.validate()?;
        Ok(file)
    }
}

fn check_train(coefficients: usize, train: &[Vec<f64>]) -> Result<()> {
    if coefficients != train.len() {
        return Err(Error::Format(format!(
            "payload.train_features: {} rows for {coefficients} coefficients",
            train.len()
        )));
    }
    Ok(())
}

pub fn save_model(file: &ModelFile, path: &Path) -> Result<()> {
    fs::write(path, file.to_json()).map_err(|e| Error::io(path, e))
}

pub fn load_model(path: &Path) -> Result<ModelFile> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    ModelFile::from_json(&text)
}
