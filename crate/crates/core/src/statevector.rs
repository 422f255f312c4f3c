//! Dense statevector simulation of small qubit registers.
//!
//! Basis index convention: qubit 0 is the least-significant bit of the
//! amplitude index, so `|q2 q1 q0⟩` lives at index `q0 + 2 q1 + 4 q2`.
//! Bitstrings produced by [`Counts::bitstring`] print qubit `n-1` first.

use std::collections::BTreeMap;

use num_complex::Complex64;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest register simulated exactly.
pub const MAX_QUBITS: usize = 20;

const NORM_TOL: f64 = 1e-10;

/// Amplitude vector of an `n`-qubit register.
#[derive(Clone, Debug, PartialEq)]
pub struct StateVector {
    n_qubits: usize,
    amps: Vec<Complex64>,
}

/// A gate acting on one or two qubits. Angles are in radians.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "gate", rename_all = "lowercase")]
pub enum Gate {
    H {
        q: usize,
    },
    X {
        q: usize,
    },
    P {
        q: usize,
        theta: f64,
    },
    Rx {
        q: usize,
        theta: f64,
    },
    Ry {
        q: usize,
        theta: f64,
    },
    Rz {
        q: usize,
        theta: f64,
    },
    U3 {
        q: usize,
        theta: f64,
        phi: f64,
        lambda: f64,
    },
    Cnot {
        control: usize,
        target: usize,
    },
    Cz {
        a: usize,
        b: usize,
    },
}

/// Ordered gate list on a fixed register width.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Circuit {
    n_qubits: usize,
    gates: Vec<Gate>,
}

/// Measurement histogram keyed by basis index.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Counts {
    n_qubits: usize,
    shots: u64,
    counts: BTreeMap<usize, u64>,
}

impl Gate {
    pub fn qubits(&self) -> Vec<usize> {
        match *self {
            Gate::H { q }
            | Gate::X { q }
            | Gate::P { q, .. }
            | Gate::Rx { q, .. }
            | Gate::Ry { q, .. }
            | Gate::Rz { q, .. }
            | Gate::U3 { q, .. } => vec![q],
            Gate::Cnot { control, target } => vec![control, target],
            Gate::Cz { a, b } => vec![a, b],
        }
    }

    pub fn validate(&self, n_qubits: usize) -> Result<()> {
        let qs = self.qubits();
        if let Some(&bad) = qs.iter().find(|&&q| q >= n_qubits) {
            return Err(Error::Index(format!(
                "gate {self:?} targets qubit {bad} on a {n_qubits}-qubit register"
            )));
        }
        if qs.len() == 2 && qs[0] == qs[1] {
            return Err(Error::Index(format!("gate {self:?} repeats qubit {}", qs[0])));
        }
        Ok(())
    }

    pub fn inverse(&self) -> Gate {
        match *self {
            Gate::P { q, theta } => Gate::P { q, theta: -theta },
            Gate::Rx { q, theta } => Gate::Rx { q, theta: -theta },
            Gate::Ry { q, theta } => Gate::Ry { q, theta: -theta },
            Gate::Rz { q, theta } => Gate::Rz { q, theta: -theta },
            Gate::U3 { q, theta, phi, lambda } => Gate::U3 {
                q,
                theta: -theta,
                phi: -lambda,
                lambda: -phi,
            },
            g @ (Gate::H { .. } | Gate::X { .. } | Gate::Cnot { .. } | Gate::Cz { .. }) => g,
        }
    }

    /// 2x2 matrix `[[m00, m01], [m10, m11]]` for single-qubit gates.
    fn matrix(&self) -> Option<[Complex64; 4]> {
        let c = |re: f64, im: f64| Complex64::new(re, im);
        let m = match *self {
            Gate::H { .. } => {
                let s = std::f64::consts::FRAC_1_SQRT_2;
                [c(s, 0.0), c(s, 0.0), c(s, 0.0), c(-s, 0.0)]
            }
            Gate::X { .. } => [c(0.0, 0.0), c(1.0, 0.0), c(1.0, 0.0), c(0.0, 0.0)],
            Gate::P { theta, .. } => [c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), Complex64::cis(theta)],
            Gate::Rx { theta, .. } => {
                let (s, co) = (theta / 2.0).sin_cos();
                [c(co, 0.0), c(0.0, -s), c(0.0, -s), c(co, 0.0)]
            }
            Gate::Ry { theta, .. } => {
                let (s, co) = (theta / 2.0).sin_cos();
                [c(co, 0.0), c(-s, 0.0), c(s, 0.0), c(co, 0.0)]
            }
            Gate::Rz { theta, .. } => [
                Complex64::cis(-theta / 2.0),
                c(0.0, 0.0),
                c(0.0, 0.0),
                Complex64::cis(theta / 2.0),
            ],
            Gate::U3 { theta, phi, lambda, .. } => {
                let (s, co) = (theta / 2.0).sin_cos();
                [
                    c(co, 0.0),
                    -Complex64::cis(lambda) * s,
                    Complex64::cis(phi) * s,
                    Complex64::cis(phi + lambda) * co,
                ]
            }
            Gate::Cnot { .. } | Gate::Cz { .. } => return None,
        };
        Some(m)
    }
}

impl Circuit {
    pub fn new(n_qubits: usize) -> Self {
        Circuit {
            n_qubits,
            gates: Vec::new(),
        }
    }

    /// Builds a circuit, checking every gate against the register width.
    pub fn from_gates(n_qubits: usize, gates: Vec<Gate>) -> Result<Self> {
        for g in &gates {
            g.validate(n_qubits)?;
        }
        Ok(Circuit { n_qubits, gates })
    }

    pub fn push(&mut self, gate: Gate) -> Result<()> {
        gate.validate(self.n_qubits)?;
        self.gates.push(gate);
        Ok(())
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn gates(&self) -> &[Gate] {
        &self.gates
    }

    /// Reversed circuit with every gate inverted.
    pub fn adjoint(&self) -> Circuit {
        Circuit {
            n_qubits: self.n_qubits,
            gates: self.gates.iter().rev().map(Gate::inverse).collect(),
        }
    }
}

impl StateVector {
    /// The all-zeros basis state `|0…0⟩`.
    pub fn zero(n_qubits: usize) -> Result<Self> {
        if n_qubits == 0 || n_qubits > MAX_QUBITS {
            return Err(Error::Capacity(format!(
                "{n_qubits} qubits requested; exact simulation supports 1..={MAX_QUBITS}"
            )));
        }
        let mut amps = vec![Complex64::new(0.0, 0.0); 1 << n_qubits];
        amps[0] = Complex64::new(1.0, 0.0);
        Ok(StateVector { n_qubits, amps })
    }

    /// Wraps raw amplitudes. The length must be a power of two and the
    /// vector must be normalized.
    pub fn from_amplitudes(amps: Vec<Complex64>) -> Result<Self> {
        let len = amps.len();
        if len < 2 || !len.is_power_of_two() {
            return Err(Error::Dimension(format!(
                "amplitude vector length {len} is not a power of two >= 2"
            )));
        }
        let n_qubits = len.trailing_zeros() as usize;
        if n_qubits > MAX_QUBITS {
            return Err(Error::Capacity(format!("{n_qubits} qubits exceeds {MAX_QUBITS}")));
        }
        let norm: f64 = amps.iter().map(|a| a.norm_sqr()).sum();
        if !norm.is_finite() || (norm - 1.0).abs() > NORM_TOL {
            return Err(Error::Normalization(format!("squared norm {norm} is not 1")));
        }
        Ok(StateVector { n_qubits, amps })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }

    pub fn apply_gate(&mut self, gate: &Gate) -> Result<()> {
        gate.validate(self.n_qubits)?;
        match *gate {
            Gate::Cnot { control, target } => {
                let cbit = 1usize << control;
                let tbit = 1usize << target;
                for i in 0..self.amps.len() {
                    if i & cbit != 0 && i & tbit == 0 {
                        self.amps.swap(i, i | tbit);
                    }
                }
            }
            Gate::Cz { a, b } => {
                let mask = (1usize << a) | (1usize << b);
                for (i, amp) in self.amps.iter_mut().enumerate() {
                    if i & mask == mask {
                        *amp = -*amp;
                    }
                }
            }
            _ => {
                let [m00, m01, m10, m11] = gate.matrix().expect("single-qubit gate");
                let q = gate.qubits()[0];
                let stride = 1usize << q;
                for block in (0..self.amps.len()).step_by(stride << 1) {
                    for i in block..block + stride {
                        let a0 = self.amps[i];
                        let a1 = self.amps[i + stride];
                        self.amps[i] = m00 * a0 + m01 * a1;
                        self.amps[i + stride] = m10 * a0 + m11 * a1;
                    }
                }
            }
        }
        Ok(())
    }

    pub fn apply_circuit(&mut self, circuit: &Circuit) -> Result<()> {
        if circuit.n_qubits != self.n_qubits {
            return Err(Error::Dimension(format!(
                "circuit acts on {} qubits, state has {}",
                circuit.n_qubits, self.n_qubits
            )));
        }
        for g in &circuit.gates {
            self.apply_gate(g)?;
        }
        Ok(())
    }

    /// Consuming form of [`StateVector::apply_circuit`].
    pub fn evolved(mut self, circuit: &Circuit) -> Result<Self> {
        self.apply_circuit(circuit)?;
        Ok(self)
    }

    /// `⟨self|other⟩ = Σ conj(self_i) other_i`.
    pub fn inner_product(&self, other: &StateVector) -> Result<Complex64> {
        if self.n_qubits != other.n_qubits {
            return Err(Error::Dimension(format!(
                "inner product of {}-qubit and {}-qubit states",
                self.n_qubits, other.n_qubits
            )));
        }
        Ok(self.amps.iter().zip(&other.amps).map(|(a, b)| a.conj() * b).sum())
    }

    pub fn probability(&self, index: usize) -> f64 {
        self.amps.get(index).map_or(0.0, |a| a.norm_sqr())
    }

    pub fn probability_all_zeros(&self) -> f64 {
        self.amps[0].norm_sqr()
    }

    /// Draws `shots` computational-basis measurements, seeded.
    pub fn sample_measurements(&self, shots: u64, seed: u64) -> Result<Counts> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        self.sample_with(shots, &mut rng)
    }

    pub fn sample_with<R: Rng + ?Sized>(&self, shots: u64, rng: &mut R) -> Result<Counts> {
        if shots == 0 {
            return Err(Error::Argument("shots must be >= 1".into()));
        }
        let mut cumulative = Vec::with_capacity(self.amps.len());
        let mut acc = 0.0;
        for a in &self.amps {
            acc += a.norm_sqr();
            cumulative.push(acc);
        }
        let total = acc;
        // Absorbs `u == total` from rounding at the top end.
        let last = self.amps.iter().rposition(|a| a.norm_sqr() > 0.0).unwrap_or(0);
        let mut counts = BTreeMap::new();
        for _ in 0..shots {
            let u = rng.gen::<f64>() * total;
            let idx = cumulative.partition_point(|&c| c <= u).min(last);
            *counts.entry(idx).or_insert(0) += 1;
        }
        Ok(Counts {
            n_qubits: self.n_qubits,
            shots,
            counts,
        })
    }
}

impl Counts {
    pub fn shots(&self) -> u64 {
        self.shots
    }

    pub fn count(&self, index: usize) -> u64 {
        self.counts.get(&index).copied().unwrap_or(0)
    }

    pub fn frequency(&self, index: usize) -> f64 {
        self.count(index) as f64 / self.shots as f64
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, u64)> + '_ {
        self.counts.iter().map(|(&k, &v)| (k, v))
    }

    /// Bitstring for a basis index, most-significant qubit first.
    pub fn bitstring(&self, index: usize) -> String {
        (0..self.n_qubits)
            .rev()
            .map(|q| if index >> q & 1 == 1 { '1' } else { '0' })
            .collect()
    }
}
