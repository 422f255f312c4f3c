//! Trainable feature-encoding circuit templates.
//!
//! Each layer applies, per qubit, a trainable rotation followed by a data
//! rotation, then a CNOT entangler. Features are assigned to qubits
//! round-robin with a per-layer offset, so the feature dimension does not
//! have to match the register width.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::statevector::{Circuit, Gate};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DataAxis {
    Rx,
    Ry,
    Rz,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TrainableAxis {
    Rx,
    Ry,
    Rz,
    P,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Entanglement {
    None,
    LinearChain,
    Ring,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureMapSpec {
    pub n_qubits: usize,
    pub n_layers: usize,
    pub data_axis: DataAxis,
    pub trainable_axis: TrainableAxis,
    pub entanglement: Entanglement,
    #[serde(default = "default_scaling")]
    pub data_scaling: f64,
}

fn default_scaling() -> f64 {
    1.0
}

/// Trainable encoding angles, one per qubit per layer.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ParamVector(pub Vec<f64>);

impl ParamVector {
    pub fn zeros(len: usize) -> Self {
        ParamVector(vec![0.0; len])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl From<Vec<f64>> for ParamVector {
    fn from(v: Vec<f64>) -> Self {
        ParamVector(v)
    }
}

impl FeatureMapSpec {
    pub fn new(
        n_qubits: usize,
        n_layers: usize,
        data_axis: DataAxis,
        trainable_axis: TrainableAxis,
        entanglement: Entanglement,
    ) -> Self {
        FeatureMapSpec {
            n_qubits,
            n_layers,
            data_axis,
            trainable_axis,
            entanglement,
            data_scaling: 1.0,
        }
    }

    pub fn with_scaling(mut self, data_scaling: f64) -> Self {
        self.data_scaling = data_scaling;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_qubits == 0 || self.n_layers == 0 {
            return Err(Error::Argument(format!(
                "feature map needs >= 1 qubit and layer, got {} qubits, {} layers",
                self.n_qubits, self.n_layers
            )));
        }
        if self.n_qubits > crate::statevector::MAX_QUBITS {
            return Err(Error::Capacity(format!("{} qubits", self.n_qubits)));
        }
        if !self.data_scaling.is_finite() {
            return Err(Error::Argument("data_scaling must be finite".into()));
        }
        Ok(())
    }

    pub fn param_count(&self) -> usize {
        self.n_layers * self.n_qubits
    }

    pub fn check_params(&self, params: &ParamVector) -> Result<()> {
        if params.len() != self.param_count() {
            return Err(Error::Dimension(format!(
                "feature map expects {} trainable parameters, got {}",
                self.param_count(),
                params.len()
            )));
        }
        if params.0.iter().any(|v| !v.is_finite()) {
            return Err(Error::Argument("trainable parameters must be finite".into()));
        }
        Ok(())
    }

    /// Uniform draws from `[-π, π]`.
    pub fn random_params(&self, seed: u64) -> ParamVector {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let pi = std::f64::consts::PI;
        ParamVector((0..self.param_count()).map(|_| rng.gen_range(-pi..=pi)).collect())
    }

    /// Binds a data point and trainable parameters into a concrete circuit.
    pub fn build_circuit(&self, x: &[f64], params: &ParamVector) -> Result<Circuit> {
        self.validate()?;
        self.check_params(params)?;
        if x.is_empty() {
            return Err(Error::Dimension("data point has no features".into()));
        }
        let n = self.n_qubits;
        let d = x.len();
        let mut gates = Vec::with_capacity(self.n_layers * (2 * n + n));
        for layer in 0..self.n_layers {
            for q in 0..n {
                let theta = params.0[layer * n + q];
                gates.push(match self.trainable_axis {
                    TrainableAxis::Rx => Gate::Rx { q, theta },
                    TrainableAxis::Ry => Gate::Ry { q, theta },
                    TrainableAxis::Rz => Gate::Rz { q, theta },
                    TrainableAxis::P => Gate::P { q, theta },
                });
            }
            for q in 0..n {
                let theta = self.data_scaling * x[(layer * n + q) % d];
                gates.push(match self.data_axis {
                    DataAxis::Rx => Gate::Rx { q, theta },
                    DataAxis::Ry => Gate::Ry { q, theta },
                    DataAxis::Rz => Gate::Rz { q, theta },
                });
            }
            if n > 1 {
                match self.entanglement {
                    Entanglement::None => {}
                    Entanglement::LinearChain | Entanglement::Ring => {
                        for q in 0..n - 1 {
                            gates.push(Gate::Cnot {
                                control: q,
                                target: q + 1,
                            });
                        }
                        if self.entanglement == Entanglement::Ring {
                            gates.push(Gate::Cnot {
                                control: n - 1,
                                target: 0,
                            });
                        }
                    }
                }
            }
        }
        Circuit::from_gates(n, gates)
    }
}
