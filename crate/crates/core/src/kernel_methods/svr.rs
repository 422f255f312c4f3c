//! ε-insensitive support vector regression on a precomputed kernel.
//!
//! The dual is written over `z = (α, α*) ∈ [0, C]^{2m}` with `β = α − α*`:
//!
//! ```text
//! max  −½ βᵀKβ − ε Σ(α_i + α*_i) + yᵀβ   s.t.  Σ β_i = 0
//! ```
//!
//! and solved by accelerated projected gradient with adaptive restart. The
//! projection onto the box-plus-hyperplane set is a one-dimensional monotone
//! root find on the hyperplane multiplier.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{check_cross, check_symmetric};
use crate::error::{Error, Result};
use crate::gram::GramMatrix;

#[derive(Clone, Debug, PartialEq)]
pub struct SvrOptions {
    pub c: f64,
    pub epsilon: f64,
    /// Bound on the natural residual `‖z − P(z − ∇f(z))‖∞`.
    pub tol: f64,
    pub max_iter: usize,
}

impl SvrOptions {
    pub fn new(c: f64, epsilon: f64) -> Self {
        SvrOptions {
            c,
            epsilon,
            tol: 1e-5,
            max_iter: 500_000,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainedSVR {
    pub coef: Vec<f64>,
    pub epsilon: f64,
    pub c: f64,
    pub bias: f64,
    pub kernel_id: String,
    pub iterations: usize,
    pub converged: bool,
}

pub fn svr_fit(k: &GramMatrix, y: &[f64], c: f64, epsilon: f64) -> Result<TrainedSVR> {
    svr_fit_with(k, y, &SvrOptions::new(c, epsilon))
}

pub fn svr_fit_with(k: &GramMatrix, y: &[f64], opts: &SvrOptions) -> Result<TrainedSVR> {
    let m = k.point_count();
    if y.len() != m {
        return Err(Error::Dimension(format!("{} targets for {m} kernel rows", y.len())));
    }
    if !(opts.c > 0.0 && opts.c.is_finite()) {
        return Err(Error::Argument(format!("C must be > 0, got {}", opts.c)));
    }
    if !(opts.epsilon >= 0.0 && opts.epsilon.is_finite()) {
        return Err(Error::Argument(format!("epsilon must be >= 0, got {}", opts.epsilon)));
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::Argument("targets must be finite".into()));
    }
    check_symmetric(k)?;

    let kv = (k.values() + k.values().transpose()) * 0.5;
    let yv = DVector::from_column_slice(y);
    let problem = Dual {
        k: &kv,
        y: &yv,
        c: opts.c,
        eps: opts.epsilon,
    };
    let lmax = kv.clone().symmetric_eigenvalues().amax();
    let step = if lmax > 0.0 { 1.0 / (2.0 * lmax) } else { 1.0 };

    let mut z = DVector::zeros(2 * m);
    let mut w = z.clone();
    let mut t = 1.0f64;
    let mut f_prev = problem.objective(&z);
    let mut iterations = 0;
    let mut converged = false;
    while iterations < opts.max_iter {
        if iterations % 10 == 0 && problem.residual(&z) <= opts.tol {
            converged = true;
            break;
        }
        iterations += 1;
        let g = problem.gradient(&w);
        let z_next = problem.project(&(&w - g * step));
        let f_next = problem.objective(&z_next);
        if f_next > f_prev {
            // Restart momentum from the last iterate.
            t = 1.0;
            w = z.clone();
            continue;
        }
        let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
        w = &z_next + (&z_next - &z) * ((t - 1.0) / t_next);
        t = t_next;
        z = z_next;
        f_prev = f_next;
    }

    if !converged {
        converged = problem.residual(&z) <= opts.tol;
    }
    let coef: Vec<f64> = (0..m).map(|i| z[i] - z[m + i]).collect();
    let beta = DVector::from_column_slice(&coef);
    let fitted = &kv * &beta;
    let bias = svr_bias(&z, &fitted, y, opts.c, opts.epsilon);
    Ok(TrainedSVR {
        coef,
        epsilon: opts.epsilon,
        c: opts.c,
        bias,
        kernel_id: k.kernel_id().to_string(),
        iterations,
        converged,
    })
}

struct Dual<'a> {
    k: &'a DMatrix<f64>,
    y: &'a DVector<f64>,
    c: f64,
    eps: f64,
}

impl Dual<'_> {
    fn split(&self, z: &DVector<f64>) -> DVector<f64> {
        let m = self.y.len();
        DVector::from_fn(m, |i, _| z[i] - z[m + i])
    }

    /// Negated dual (minimized).
    fn objective(&self, z: &DVector<f64>) -> f64 {
        let beta = self.split(z);
        0.5 * beta.dot(&(self.k * &beta)) + self.eps * z.sum() - self.y.dot(&beta)
    }

    fn gradient(&self, z: &DVector<f64>) -> DVector<f64> {
        let m = self.y.len();
        let kb = self.k * self.split(z);
        DVector::from_fn(2 * m, |i, _| {
            if i < m {
                kb[i] + self.eps - self.y[i]
            } else {
                -kb[i - m] + self.eps + self.y[i - m]
            }
        })
    }

    fn residual(&self, z: &DVector<f64>) -> f64 {
        let p = self.project(&(z - self.gradient(z)));
        (z - p).amax()
    }

    /// Euclidean projection onto `[0, C]^{2m} ∩ {Σα − Σα* = 0}`.
    fn project(&self, v: &DVector<f64>) -> DVector<f64> {
        let m = self.y.len();
        let c = self.c;
        let sign = |i: usize| if i < m { 1.0 } else { -1.0 };
        let at = |nu: f64| DVector::from_fn(2 * m, |i, _| (v[i] - nu * sign(i)).clamp(0.0, c));
        let balance = |nu: f64| {
            let p = at(nu);
            (0..m).map(|i| p[i] - p[m + i]).sum::<f64>()
        };
        // `balance` is non-increasing and piecewise linear in ν with kinks at
        // these breakpoints; locate the bracketing pair, then interpolate.
        let mut kinks: Vec<f64> = (0..m).flat_map(|i| [v[i] - c, v[i], -v[m + i], c - v[m + i]]).collect();
        kinks.sort_by(f64::total_cmp);
        kinks.dedup();
        let (mut lo, mut hi) = (0usize, kinks.len() - 1);
        let nu = if balance(kinks[lo]) <= 0.0 {
            kinks[lo]
        } else if balance(kinks[hi]) >= 0.0 {
            kinks[hi]
        } else {
            while hi - lo > 1 {
                let mid = (lo + hi) / 2;
                if balance(kinks[mid]) >= 0.0 {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            let (h_lo, h_hi) = (balance(kinks[lo]), balance(kinks[hi]));
            kinks[lo] + h_lo * (kinks[hi] - kinks[lo]) / (h_lo - h_hi)
        };
        let mut p = at(nu);
        // Absorb the leftover imbalance into a free coordinate so Σβ = 0 holds tightly.
        let excess: f64 = (0..m).map(|i| p[i] - p[m + i]).sum();
        if excess != 0.0 {
            if let Some(i) = (0..2 * m).find(|&i| {
                let target = p[i] - excess * sign(i);
                target > 0.0 && target < c
            }) {
                p[i] -= excess * sign(i);
            }
        }
        p
    }
}

/// Mean over free multipliers, else the midpoint of the KKT-feasible interval.
fn svr_bias(z: &DVector<f64>, fitted: &DVector<f64>, y: &[f64], c: f64, eps: f64) -> f64 {
    let m = y.len();
    let tol = 1e-9 * c;
    let free = |v: f64| v > tol && v < c - tol;
    let mut sum = 0.0;
    let mut n = 0usize;
    let mut lower = f64::NEG_INFINITY;
    let mut upper = f64::INFINITY;
    for i in 0..m {
        let e = y[i] - fitted[i];
        let (a, a_star) = (z[i], z[m + i]);
        if free(a) {
            sum += e - eps;
            n += 1;
        } else if a <= tol {
            lower = lower.max(e - eps);
        } else {
            upper = upper.min(e - eps);
        }
        if free(a_star) {
            sum += e + eps;
            n += 1;
        } else if a_star <= tol {
            upper = upper.min(e + eps);
        } else {
            lower = lower.max(e + eps);
        }
    }
    if n > 0 {
        return sum / n as f64;
    }
    match (lower.is_finite(), upper.is_finite()) {
        (true, true) => 0.5 * (lower + upper),
        (true, false) => lower,
        (false, true) => upper,
        (false, false) => 0.0,
    }
}

impl TrainedSVR {
    pub fn predict(&self, k_test: &DMatrix<f64>) -> Result<Vec<f64>> {
        check_cross(k_test, self.coef.len())?;
        Ok(k_test
            .row_iter()
            .map(|row| row.iter().zip(&self.coef).map(|(k, b)| k * b).sum::<f64>() + self.bias)
            .collect())
    }
}
