//! Quantum kernel evaluation: `k(x, x') = |⟨0|U†(x') U(x)|0⟩|²`.
//!
//! Two overlap circuits are supported. The inversion test runs `U(x)` then
//! `U†(x')` and reads the all-zeros probability. The swap test is realized at
//! the statevector level: its ancilla reads `0` with probability
//! `p0 = 1/2 + 1/2 |⟨ψ(x')|ψ(x)⟩|²`, and in shot mode the kernel estimate is
//! `2 p̂0 - 1` clamped to `[0, 1]`.
//!
//! In shot mode every matrix entry `(i, j)` draws from its own ChaCha stream
//! derived from `(seed, i, j)`, so results do not depend on evaluation order
//! or thread count.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::featuremap::{FeatureMapSpec, ParamVector};
use crate::gram::{check_points, pool, GramMatrix, Kernel};
use crate::statevector::{Circuit, StateVector};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OverlapCircuit {
    Inversion,
    Swap,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum EvalMode {
    Exact,
    Shots { shots: u64 },
}

/// Everything needed to evaluate a trainable quantum kernel.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KernelEngineConfig {
    pub feature_map: FeatureMapSpec,
    pub params: ParamVector,
    pub mode: EvalMode,
    pub circuit: OverlapCircuit,
    pub seed: u64,
}

impl KernelEngineConfig {
    pub fn exact(feature_map: FeatureMapSpec, params: ParamVector) -> Self {
        KernelEngineConfig {
            feature_map,
            params,
            mode: EvalMode::Exact,
            circuit: OverlapCircuit::Inversion,
            seed: 0,
        }
    }

    pub fn with_circuit(mut self, circuit: OverlapCircuit) -> Self {
        self.circuit = circuit;
        self
    }

    pub fn with_shots(mut self, shots: u64, seed: u64) -> Self {
        self.mode = EvalMode::Shots { shots };
        self.seed = seed;
        self
    }

    pub fn with_params(&self, params: ParamVector) -> Self {
        KernelEngineConfig { params, ..self.clone() }
    }

    pub fn validate(&self) -> Result<()> {
        self.feature_map.validate()?;
        self.feature_map.check_params(&self.params)?;
        if let EvalMode::Shots { shots: 0 } = self.mode {
            return Err(Error::Argument("shot mode needs shots >= 1".into()));
        }
        Ok(())
    }

    pub fn kernel_id(&self) -> String {
        serde_json::to_string(self).expect("config serializes")
    }

    fn encode(&self, x: &[f64]) -> Result<Circuit> {
        self.feature_map.build_circuit(x, &self.params)
    }

    fn prepare(&self, x: &[f64]) -> Result<Encoded> {
        let circuit = self.encode(x)?;
        let state = StateVector::zero(self.feature_map.n_qubits)?.evolved(&circuit)?;
        Ok(Encoded {
            adjoint: circuit.adjoint(),
            state,
        })
    }

    /// Single kernel value. In shot mode this uses the stream of entry `(0, 0)`.
    pub fn kernel_value(&self, x: &[f64], x_prime: &[f64]) -> Result<f64> {
        self.validate()?;
        if x.iter().chain(x_prime).any(|v| !v.is_finite()) {
            return Err(Error::Argument("kernel inputs must be finite".into()));
        }
        let a = self.prepare(x)?;
        let b = self.prepare(x_prime)?;
        self.pair_value(&a, &b, 0, 0)
    }

    fn pair_value(&self, a: &Encoded, b: &Encoded, i: usize, j: usize) -> Result<f64> {
        match (self.circuit, self.mode) {
            (OverlapCircuit::Inversion, EvalMode::Exact) => {
                let s = a.state.clone().evolved(&b.adjoint)?;
                Ok(s.probability_all_zeros().min(1.0))
            }
            (OverlapCircuit::Swap, EvalMode::Exact) => fidelity(&a.state, &b.state),
            (OverlapCircuit::Inversion, EvalMode::Shots { shots }) => {
                let s = a.state.clone().evolved(&b.adjoint)?;
                let counts = s.sample_with(shots, &mut pair_rng(self.seed, i, j))?;
                Ok(counts.frequency(0))
            }
            (OverlapCircuit::Swap, EvalMode::Shots { shots }) => {
                let f = fidelity(&a.state, &b.state)?;
                let p0 = (0.5 + 0.5 * f).clamp(0.0, 1.0);
                let ancilla = StateVector::from_amplitudes(vec![
                    Complex64::new(p0.sqrt(), 0.0),
                    Complex64::new((1.0 - p0).sqrt(), 0.0),
                ])?;
                let counts = ancilla.sample_with(shots, &mut pair_rng(self.seed, i, j))?;
                Ok((2.0 * counts.frequency(0) - 1.0).clamp(0.0, 1.0))
            }
        }
    }

    fn prepare_all(&self, points: &[Vec<f64>]) -> Result<Vec<Encoded>> {
        pool().install(|| points.par_iter().map(|x| self.prepare(x)).collect())
    }
}

struct Encoded {
    state: StateVector,
    adjoint: Circuit,
}

fn fidelity(a: &StateVector, b: &StateVector) -> Result<f64> {
    // Rounding can push the squared overlap of unit vectors just past 1.
    Ok(b.inner_product(a)?.norm_sqr().min(1.0))
}

fn pair_rng(seed: u64, i: usize, j: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((i as u64) << 32) | j as u64);
    rng
}

impl Kernel for KernelEngineConfig {
    /// Exact mode evaluates the upper triangle only and fixes the diagonal
    /// at 1; shot mode evaluates every entry independently.
    fn gram(&self, points: &[Vec<f64>]) -> Result<GramMatrix> {
        self.validate()?;
        check_points(points, "training")?;
        let enc = self.prepare_all(points)?;
        let m = points.len();
        let exact = self.mode == EvalMode::Exact;
        let rows: Vec<Vec<f64>> = pool().install(|| {
            (0..m)
                .into_par_iter()
                .map(|i| {
                    let start = if exact { i + 1 } else { 0 };
                    (start..m)
                        .map(|j| self.pair_value(&enc[i], &enc[j], i, j))
                        .collect::<Result<Vec<f64>>>()
                })
                .collect::<Result<_>>()
        })?;
        let mut k = DMatrix::zeros(m, m);
        for (i, row) in rows.into_iter().enumerate() {
            if exact {
                k[(i, i)] = 1.0;
                for (off, v) in row.into_iter().enumerate() {
                    let j = i + 1 + off;
                    k[(i, j)] = v;
                    k[(j, i)] = v;
                }
            } else {
                for (j, v) in row.into_iter().enumerate() {
                    k[(i, j)] = v;
                }
            }
        }
        GramMatrix::new(k, self.kernel_id())
    }

    fn cross_gram(&self, test: &[Vec<f64>], train: &[Vec<f64>]) -> Result<DMatrix<f64>> {
        self.validate()?;
        check_points(test, "test")?;
        check_points(train, "training")?;
        let a = self.prepare_all(test)?;
        let b = self.prepare_all(train)?;
        let rows: Vec<Vec<f64>> = pool().install(|| {
            (0..test.len())
                .into_par_iter()
                .map(|i| {
                    (0..train.len())
                        .map(|j| self.pair_value(&a[i], &b[j], i, j))
                        .collect::<Result<Vec<f64>>>()
                })
                .collect::<Result<_>>()
        })?;
        Ok(DMatrix::from_fn(test.len(), train.len(), |i, j| rows[i][j]))
    }
}
