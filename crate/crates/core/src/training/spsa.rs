//! Simultaneous perturbation stochastic approximation.

use rand::Rng;

use crate::error::{Error, Result};

/// Gain schedule `a_k = a0 / (k + 1 + A)^alpha`, `c_k = c0 / (k + 1)^gamma`.
#[derive(Clone, Debug, PartialEq)]
pub struct SpsaConfig {
    pub a0: f64,
    pub c0: f64,
    pub a_stab: f64,
    pub alpha_exp: f64,
    pub gamma_exp: f64,
    pub max_iter: usize,
    pub seed: u64,
}

impl Default for SpsaConfig {
    fn default() -> Self {
        SpsaConfig {
            a0: 0.2,
            c0: 0.1,
            a_stab: 10.0,
            alpha_exp: 0.602,
            gamma_exp: 0.101,
            max_iter: 100,
            seed: 0,
        }
    }
}

impl SpsaConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.a0 > 0.0 && self.c0 > 0.0) {
            return Err(Error::Argument("SPSA gains a0 and c0 must be > 0".into()));
        }
        if !(self.a_stab >= 0.0) {
            return Err(Error::Argument("SPSA stability constant must be >= 0".into()));
        }
        if !(0.0 < self.gamma_exp && self.gamma_exp < self.alpha_exp && self.alpha_exp <= 1.0) {
            return Err(Error::Argument(format!(
                "SPSA exponents need 0 < gamma < alpha <= 1, got gamma={} alpha={}",
                self.gamma_exp, self.alpha_exp
            )));
        }
        Ok(())
    }

    pub fn step_gain(&self, k: usize) -> f64 {
        self.a0 / (k as f64 + 1.0 + self.a_stab).powf(self.alpha_exp)
    }

    pub fn probe_gain(&self, k: usize) -> f64 {
        self.c0 / (k as f64 + 1.0).powf(self.gamma_exp)
    }
}

/// Random ±1 perturbation direction.
pub fn rademacher<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<f64> {
    (0..n).map(|_| if rng.gen::<bool>() { 1.0 } else { -1.0 }).collect()
}

/// The two probe points of one SPSA step and the gradient estimate.
#[derive(Clone, Debug, PartialEq)]
pub struct SpsaProbe {
    pub plus: Vec<f64>,
    pub minus: Vec<f64>,
    pub f_plus: f64,
    pub f_minus: f64,
    pub gradient: Vec<f64>,
}

/// `ĝ_j = [f(λ + cΔ) − f(λ − cΔ)] / (2 c Δ_j)`, using exactly two evaluations.
pub fn spsa_probe<F>(mut f: F, params: &[f64], c_k: f64, delta: &[f64]) -> Result<SpsaProbe>
where
    F: FnMut(&[f64]) -> Result<f64>,
{
    if !(c_k > 0.0) {
        return Err(Error::Argument(format!("perturbation size must be > 0, got {c_k}")));
    }
    if delta.len() != params.len() {
        return Err(Error::Dimension(format!(
            "perturbation has {} entries for {} parameters",
            delta.len(),
            params.len()
        )));
    }
    let plus: Vec<f64> = params.iter().zip(delta).map(|(p, d)| p + c_k * d).collect();
    let minus: Vec<f64> = params.iter().zip(delta).map(|(p, d)| p - c_k * d).collect();
    let f_plus = f(&plus)?;
    let f_minus = f(&minus)?;
    let diff = f_plus - f_minus;
    let gradient = delta.iter().map(|d| diff / (2.0 * c_k * d)).collect();
    Ok(SpsaProbe {
        plus,
        minus,
        f_plus,
        f_minus,
        gradient,
    })
}

pub fn spsa_gradient<F>(f: F, params: &[f64], c_k: f64, delta: &[f64]) -> Result<Vec<f64>>
where
    F: FnMut(&[f64]) -> Result<f64>,
{
    Ok(spsa_probe(f, params, c_k, delta)?.gradient)
}
