//! Metric learning for kernel ridge regression.
//!
//! Alternates an exact ridge solve for α with a gradient step on the
//! transform `A` of the kernel `k_A(x, x') = exp(-γ ‖A(x − x')‖²)`, minimizing
//!
//! ```text
//! L(A) = ‖K_A α − y‖² + reg · αᵀ K_A α
//! ```
//!
//! with `∂k_ij/∂A = −2γ k_ij A d_ij d_ijᵀ`, `d_ij = x_i − x_j`.

use nalgebra::{DMatrix, DVector};

use crate::classical_kernels::ClassicalKernel;
use crate::error::{Error, Result};
use crate::gram::{check_points, Kernel};
use crate::kernel_methods::{krr_fit, TrainedKRR};

/// Halvings tried before an A-step is skipped.
const MAX_HALVINGS: usize = 10;

#[derive(Clone, Debug, PartialEq)]
pub struct MlkrrConfig {
    pub gamma: f64,
    pub reg: f64,
    pub lr: f64,
    pub outer_iters: usize,
    /// Starting transform; identity when `None`.
    pub a_init: Option<DMatrix<f64>>,
    /// Halve the step (up to 10 times) whenever it would raise the loss.
    pub backtrack: bool,
    pub seed: u64,
}

impl MlkrrConfig {
    pub fn new(gamma: f64, reg: f64) -> Self {
        MlkrrConfig {
            gamma,
            reg,
            lr: 0.1,
            outer_iters: 30,
            a_init: None,
            backtrack: true,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MlkrrResult {
    pub transform: DMatrix<f64>,
    pub model: TrainedKRR,
    /// Loss after each α-step, including the final refit.
    pub loss_trace: Vec<f64>,
}

fn kernel_matrix(x: &[Vec<f64>], gamma: f64, a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    Ok(ClassicalKernel::gaussian_metric(gamma, a.clone())
        .gram(x)?
        .into_values())
}

fn loss_from_kernel(k: &DMatrix<f64>, y: &[f64], reg: f64, alpha: &[f64]) -> f64 {
    let a = DVector::from_column_slice(alpha);
    let ka = k * &a;
    let resid = &ka - DVector::from_column_slice(y);
    resid.norm_squared() + reg * a.dot(&ka)
}

pub fn mlkrr_loss(x: &[Vec<f64>], y: &[f64], gamma: f64, reg: f64, a: &DMatrix<f64>, alpha: &[f64]) -> Result<f64> {
    check_shapes(x, y, a)?;
    let k = kernel_matrix(x, gamma, a)?;
    Ok(loss_from_kernel(&k, y, reg, alpha))
}

/// `∂L/∂A` at fixed α.
pub fn mlkrr_gradient(
    x: &[Vec<f64>],
    y: &[f64],
    gamma: f64,
    reg: f64,
    a: &DMatrix<f64>,
    alpha: &[f64],
) -> Result<DMatrix<f64>> {
    check_shapes(x, y, a)?;
    if alpha.len() != x.len() {
        return Err(Error::Dimension(format!(
            "{} coefficients for {} points",
            alpha.len(),
            x.len()
        )));
    }
    let k = kernel_matrix(x, gamma, a)?;
    Ok(gradient_from_kernel(x, y, gamma, reg, a, alpha, &k))
}

fn gradient_from_kernel(
    x: &[Vec<f64>],
    y: &[f64],
    gamma: f64,
    reg: f64,
    a: &DMatrix<f64>,
    alpha: &[f64],
    k: &DMatrix<f64>,
) -> DMatrix<f64> {
    let m = x.len();
    let p = a.ncols();
    let av = DVector::from_column_slice(alpha);
    let resid = k * &av - DVector::from_column_slice(y);
    // Weight of each kernel entry in the loss: ∂L/∂k_ij = 2 r_i α_j + reg α_i α_j.
    let w = DMatrix::from_fn(m, m, |i, j| {
        (2.0 * resid[i] * alpha[j] + reg * alpha[i] * alpha[j]) * k[(i, j)]
    });
    // Σ_ij w_ij d_ij d_ijᵀ = Xᵀ (D − W − Wᵀ) X with D = diag(rowsum + colsum).
    let mut lap = -(&w + w.transpose());
    for i in 0..m {
        lap[(i, i)] += w.row(i).sum() + w.column(i).sum();
    }
    let xm = DMatrix::from_fn(m, p, |i, j| x[i][j]);
    let scatter = xm.transpose() * lap * xm;
    a * scatter * (-2.0 * gamma)
}

fn check_shapes(x: &[Vec<f64>], y: &[f64], a: &DMatrix<f64>) -> Result<()> {
    let d = check_points(x, "training")?;
    if y.len() != x.len() {
        return Err(Error::Dimension(format!("{} targets for {} points", y.len(), x.len())));
    }
    if a.ncols() != d || !a.is_square() {
        return Err(Error::Dimension(format!(
            "transform is {}x{}, data has {d} features",
            a.nrows(),
            a.ncols()
        )));
    }
    Ok(())
}

pub fn mlkrr_fit(x: &[Vec<f64>], y: &[f64], cfg: &MlkrrConfig) -> Result<MlkrrResult> {
    if x.len() < 2 {
        return Err(Error::Argument("metric learning needs at least two points".into()));
    }
    if !(cfg.gamma > 0.0) || !(cfg.lr > 0.0) {
        return Err(Error::Argument("gamma and lr must be > 0".into()));
    }
    let d = check_points(x, "training")?;
    let mut a = cfg.a_init.clone().unwrap_or_else(|| DMatrix::identity(d, d));
    check_shapes(x, y, &a)?;
    let kernel_id = |a: &DMatrix<f64>| {
        serde_json::to_string(&ClassicalKernel::gaussian_metric(cfg.gamma, a.clone())).expect("kernel serializes")
    };

    let mut trace = Vec::with_capacity(cfg.outer_iters + 1);
    for _ in 0..cfg.outer_iters {
        let gram = ClassicalKernel::gaussian_metric(cfg.gamma, a.clone()).gram(x)?;
        let model = krr_fit(&gram, y, cfg.reg)?;
        let k = gram.into_values();
        let loss = loss_from_kernel(&k, y, cfg.reg, &model.alphas);
        trace.push(loss);
        let grad = gradient_from_kernel(x, y, cfg.gamma, cfg.reg, &a, &model.alphas, &k);
        if cfg.backtrack {
            let mut step = cfg.lr;
            for _ in 0..=MAX_HALVINGS {
                let cand = &a - &grad * step;
                if mlkrr_loss(x, y, cfg.gamma, cfg.reg, &cand, &model.alphas)? <= loss {
                    a = cand;
                    break;
                }
                step *= 0.5;
            }
        } else {
            a -= &grad * cfg.lr;
        }
    }
    let gram = ClassicalKernel::gaussian_metric(cfg.gamma, a.clone()).gram(x)?;
    let mut model = krr_fit(&gram, y, cfg.reg)?;
    model.kernel_id = kernel_id(&a);
    trace.push(loss_from_kernel(gram.values(), y, cfg.reg, &model.alphas));
    Ok(MlkrrResult {
        transform: a,
        model,
        loss_trace: trace,
    })
}
