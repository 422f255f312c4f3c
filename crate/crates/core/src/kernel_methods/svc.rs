//! Binary support vector classification on a precomputed kernel.
//!
//! Solves the dual
//!
//! ```text
//! max_α  Σ α_i − ½ Σ α_i α_j y_i y_j K_ij   s.t.  0 ≤ α_i ≤ C,  Σ α_i y_i = 0
//! ```
//!
//! with SMO: at each step the maximal violating pair is optimized analytically
//! and the gradient is updated in O(m).

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::{check_cross, check_symmetric, sign};
use crate::error::{Error, Result};
use crate::gram::GramMatrix;

const TAU: f64 = 1e-12;
/// α above this counts as a support vector.
pub const SUPPORT_TOL: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq)]
pub struct SvcOptions {
    pub c: f64,
    /// Stop when the maximal KKT violation drops below this.
    pub tol: f64,
    pub max_iter: usize,
    /// When false the bias is forced to zero after fitting.
    pub fit_bias: bool,
}

impl SvcOptions {
    pub fn new(c: f64) -> Self {
        SvcOptions {
            c,
            tol: 1e-6,
            max_iter: 1_000_000,
            fit_bias: true,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainedSVC {
    pub alphas: Vec<f64>,
    pub labels: Vec<f64>,
    pub bias: f64,
    pub support_indices: Vec<usize>,
    pub c: f64,
    pub dual_objective: f64,
    pub kernel_id: String,
}

pub fn svc_fit(k: &GramMatrix, y: &[f64], c: f64) -> Result<TrainedSVC> {
    svc_fit_with(k, y, &SvcOptions::new(c))
}

pub fn svc_fit_with(k: &GramMatrix, y: &[f64], opts: &SvcOptions) -> Result<TrainedSVC> {
    let m = k.point_count();
    if y.len() != m {
        return Err(Error::Dimension(format!("{} labels for {m} kernel rows", y.len())));
    }
    if let Some(bad) = y.iter().find(|&&v| v != 1.0 && v != -1.0) {
        return Err(Error::Argument(format!("SVC labels must be ±1, found {bad}")));
    }
    if y.iter().all(|&v| v == y[0]) {
        return Err(Error::DegenerateLabels("both classes must be present".into()));
    }
    if !(opts.c > 0.0 && opts.c.is_finite()) {
        return Err(Error::Argument(format!("C must be > 0, got {}", opts.c)));
    }
    check_symmetric(k)?;

    let kv = k.values();
    let c = opts.c;
    let q = |i: usize, j: usize| y[i] * y[j] * kv[(i, j)];
    let mut alpha = vec![0.0; m];
    // Gradient of ½αᵀQα − eᵀα.
    let mut grad = vec![-1.0; m];

    for _ in 0..opts.max_iter {
        let Some((i, j, gap)) = select_pair(&alpha, &grad, y, c) else {
            break;
        };
        if gap < opts.tol {
            break;
        }
        let (old_i, old_j) = (alpha[i], alpha[j]);
        let (ai, aj) = if y[i] != y[j] {
            let quad = positive(q(i, i) + q(j, j) + 2.0 * q(i, j));
            let delta = (-grad[i] - grad[j]) / quad;
            let diff = old_i - old_j;
            let (mut ai, mut aj) = (old_i + delta, old_j + delta);
            if diff > 0.0 {
                if aj < 0.0 {
                    aj = 0.0;
                    ai = diff;
                }
            } else if ai < 0.0 {
                ai = 0.0;
                aj = -diff;
            }
            if diff > 0.0 {
                if ai > c {
                    ai = c;
                    aj = c - diff;
                }
            } else if aj > c {
                aj = c;
                ai = c + diff;
            }
            (ai, aj)
        } else {
            let quad = positive(q(i, i) + q(j, j) - 2.0 * q(i, j));
            let delta = (grad[i] - grad[j]) / quad;
            let sum = old_i + old_j;
            let (mut ai, mut aj) = (old_i - delta, old_j + delta);
            if sum > c {
                if ai > c {
                    ai = c;
                    aj = sum - c;
                }
            } else if aj < 0.0 {
                aj = 0.0;
                ai = sum;
            }
            if sum > c {
                if aj > c {
                    aj = c;
                    ai = sum - c;
                }
            } else if ai < 0.0 {
                ai = 0.0;
                aj = sum;
            }
            (ai, aj)
        };
        alpha[i] = ai;
        alpha[j] = aj;
        let (di, dj) = (ai - old_i, aj - old_j);
        for (t, g) in grad.iter_mut().enumerate() {
            *g += q(i, t) * di + q(j, t) * dj;
        }
    }

    let margins: Vec<f64> = (0..m)
        .map(|i| (0..m).map(|j| alpha[j] * y[j] * kv[(i, j)]).sum())
        .collect();
    let bias = if opts.fit_bias {
        fit_bias(&alpha, &margins, y, c)
    } else {
        0.0
    };
    let dual_objective = dual_objective(kv, y, &alpha);
    let support_indices = (0..m).filter(|&i| alpha[i] > SUPPORT_TOL).collect();
    Ok(TrainedSVC {
        alphas: alpha,
        labels: y.to_vec(),
        bias,
        support_indices,
        c,
        dual_objective,
        kernel_id: k.kernel_id().to_string(),
    })
}

fn positive(v: f64) -> f64 {
    if v > 0.0 {
        v
    } else {
        TAU
    }
}

/// Maximal violating pair `(i, j, gap)` over the up/low index sets.
fn select_pair(alpha: &[f64], grad: &[f64], y: &[f64], c: f64) -> Option<(usize, usize, f64)> {
    let mut up: Option<(usize, f64)> = None;
    let mut low: Option<(usize, f64)> = None;
    for t in 0..alpha.len() {
        let v = -y[t] * grad[t];
        let in_up = (y[t] > 0.0 && alpha[t] < c) || (y[t] < 0.0 && alpha[t] > 0.0);
        let in_low = (y[t] > 0.0 && alpha[t] > 0.0) || (y[t] < 0.0 && alpha[t] < c);
        if in_up && up.is_none_or(|(_, best)| v > best) {
            up = Some((t, v));
        }
        if in_low && low.is_none_or(|(_, best)| v < best) {
            low = Some((t, v));
        }
    }
    let ((i, gmax), (j, gmin)) = (up?, low?);
    Some((i, j, gmax - gmin))
}

/// Mean over free multipliers; without any, the midpoint of the bias
/// interval allowed by the KKT conditions of the bounded multipliers.
fn fit_bias(alpha: &[f64], margins: &[f64], y: &[f64], c: f64) -> f64 {
    let eps = 1e-12 * c;
    let free: Vec<f64> = (0..alpha.len())
        .filter(|&i| alpha[i] > eps && alpha[i] < c - eps)
        .map(|i| y[i] - margins[i])
        .collect();
    if !free.is_empty() {
        return free.iter().sum::<f64>() / free.len() as f64;
    }
    let mut lower = f64::NEG_INFINITY;
    let mut upper = f64::INFINITY;
    for i in 0..alpha.len() {
        let bound = y[i] - margins[i];
        let at_zero = alpha[i] <= eps;
        if (at_zero && y[i] > 0.0) || (!at_zero && y[i] < 0.0) {
            lower = lower.max(bound);
        } else {
            upper = upper.min(bound);
        }
    }
    match (lower.is_finite(), upper.is_finite()) {
        (true, true) => 0.5 * (lower + upper),
        (true, false) => lower,
        (false, true) => upper,
        (false, false) => 0.0,
    }
}

/// `Σ α_i − ½ Σ α_i α_j y_i y_j K_ij`.
pub fn dual_objective(k: &DMatrix<f64>, y: &[f64], alpha: &[f64]) -> f64 {
    let m = alpha.len();
    let mut quad = 0.0;
    for i in 0..m {
        if alpha[i] == 0.0 {
            continue;
        }
        for j in 0..m {
            quad += alpha[i] * alpha[j] * y[i] * y[j] * k[(i, j)];
        }
    }
    alpha.iter().sum::<f64>() - 0.5 * quad
}

impl TrainedSVC {
    /// `g(x) = Σ α_i y_i K(x, x_i) + b` for each test row.
    pub fn decision(&self, k_test: &DMatrix<f64>) -> Result<Vec<f64>> {
        check_cross(k_test, self.alphas.len())?;
        Ok(k_test
            .row_iter()
            .map(|row| {
                row.iter()
                    .zip(self.alphas.iter().zip(&self.labels))
                    .map(|(k, (a, y))| a * y * k)
                    .sum::<f64>()
                    + self.bias
            })
            .collect())
    }

    pub fn predict(&self, k_test: &DMatrix<f64>) -> Result<Vec<f64>> {
        Ok(self.decision(k_test)?.into_iter().map(sign).collect())
    }

    pub fn support_count(&self) -> usize {
        self.support_indices.len()
    }
}
