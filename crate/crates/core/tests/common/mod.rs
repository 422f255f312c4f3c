//! Independent oracles and instance generators shared by the integration tests.
#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use qkflow::classical_kernels::ClassicalKernel;
use qkflow::kernel_methods::TrainedSVC;
use qkflow::{GramMatrix, Kernel};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub struct SvcInstance {
    pub x: Vec<Vec<f64>>,
    pub y: Vec<f64>,
    pub k: GramMatrix,
    pub c: f64,
}

/// Random 2-D points, balanced-ish ±1 labels with both classes, Gaussian kernel.
pub fn svc_instance(seed: u64, m: usize) -> SvcInstance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x: Vec<Vec<f64>> = (0..m)
        .map(|_| vec![rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0)])
        .collect();
    let mut y: Vec<f64> = (0..m).map(|_| if rng.gen::<bool>() { 1.0 } else { -1.0 }).collect();
    y[0] = 1.0;
    y[m - 1] = -1.0;
    let gamma = rng.gen_range(0.1..2.0);
    let c = rng.gen_range(0.1..10.0);
    let k = ClassicalKernel::gaussian(gamma, 2).gram(&x).unwrap();
    SvcInstance { x, y, k, c }
}

pub fn svc_dual(k: &DMatrix<f64>, y: &[f64], a: &[f64]) -> f64 {
    let m = y.len();
    let mut quad = 0.0;
    for i in 0..m {
        for j in 0..m {
            quad += a[i] * a[j] * y[i] * y[j] * k[(i, j)];
        }
    }
    a.iter().sum::<f64>() - 0.5 * quad
}

/// Exhaustive active-set solution of the SVC dual for small `m`: every index
/// is at 0, at C, or free; free coordinates solve the bordered KKT system.
pub fn svc_bruteforce(k: &DMatrix<f64>, y: &[f64], c: f64) -> f64 {
    let m = y.len();
    assert!(m <= 6);
    let q = DMatrix::from_fn(m, m, |i, j| y[i] * y[j] * k[(i, j)]);
    let mut best = f64::NEG_INFINITY;
    for code in 0..3usize.pow(m as u32) {
        let status: Vec<usize> = (0..m).map(|i| code / 3usize.pow(i as u32) % 3).collect();
        let free: Vec<usize> = (0..m).filter(|&i| status[i] == 2).collect();
        let mut a: Vec<f64> = status.iter().map(|&s| if s == 1 { c } else { 0.0 }).collect();
        if !free.is_empty() {
            let f = free.len();
            let mut sys = DMatrix::zeros(f + 1, f + 1);
            let mut rhs = DVector::zeros(f + 1);
            for (r, &i) in free.iter().enumerate() {
                for (s, &j) in free.iter().enumerate() {
                    sys[(r, s)] = q[(i, j)];
                }
                sys[(r, f)] = y[i];
                sys[(f, r)] = y[i];
                rhs[r] = 1.0
                    - (0..m)
                        .filter(|j| status[*j] != 2)
                        .map(|j| q[(i, j)] * a[j])
                        .sum::<f64>();
            }
            rhs[f] = -(0..m).filter(|j| status[*j] != 2).map(|j| y[j] * a[j]).sum::<f64>();
            let Some(sol) = sys.lu().solve(&rhs) else { continue };
            for (r, &i) in free.iter().enumerate() {
                a[i] = sol[r];
            }
        }
        let feasible = a.iter().all(|&v| (-1e-12..=c + 1e-12).contains(&v))
            && a.iter().zip(y).map(|(v, t)| v * t).sum::<f64>().abs() < 1e-10;
        if feasible {
            best = best.max(svc_dual(k, y, &a));
        }
    }
    best
}

/// Largest violation of the SVC optimality conditions at the fitted model.
pub fn svc_kkt_violation(k: &DMatrix<f64>, y: &[f64], model: &TrainedSVC) -> f64 {
    let m = y.len();
    let c = model.c;
    let mut worst: f64 = model.alphas.iter().zip(y).map(|(a, t)| a * t).sum::<f64>().abs();
    for i in 0..m {
        let a = model.alphas[i];
        worst = worst.max((-a).max(a - c));
        let f: f64 = (0..m).map(|j| model.alphas[j] * y[j] * k[(i, j)]).sum::<f64>() + model.bias;
        let g = y[i] * f;
        let scale = c.max(1.0);
        let v = if a <= 1e-9 * scale {
            (1.0 - g).max(0.0)
        } else if a >= c - 1e-9 * scale {
            (g - 1.0).max(0.0)
        } else {
            (g - 1.0).abs()
        };
        worst = worst.max(v);
    }
    worst
}

pub fn svr_dual(k: &DMatrix<f64>, y: &[f64], eps: f64, beta: &[f64]) -> f64 {
    let b = DVector::from_column_slice(beta);
    let yv = DVector::from_column_slice(y);
    -0.5 * b.dot(&(k * &b)) - eps * beta.iter().map(|v| v.abs()).sum::<f64>() + yv.dot(&b)
}

/// Exhaustive active-set solution of the SVR dual in `β = α − α*` for small `m`.
pub fn svr_bruteforce(k: &DMatrix<f64>, y: &[f64], c: f64, eps: f64) -> f64 {
    let m = y.len();
    assert!(m <= 5);
    let mut best = f64::NEG_INFINITY;
    // 0: β = 0, 1: β = C, 2: β = −C, 3: free positive, 4: free negative.
    for code in 0..5usize.pow(m as u32) {
        let status: Vec<usize> = (0..m).map(|i| code / 5usize.pow(i as u32) % 5).collect();
        let free: Vec<usize> = (0..m).filter(|&i| status[i] >= 3).collect();
        let mut beta: Vec<f64> = status
            .iter()
            .map(|&s| match s {
                1 => c,
                2 => -c,
                _ => 0.0,
            })
            .collect();
        if !free.is_empty() {
            let f = free.len();
            let mut sys = DMatrix::zeros(f + 1, f + 1);
            let mut rhs = DVector::zeros(f + 1);
            for (r, &i) in free.iter().enumerate() {
                let sign = if status[i] == 3 { 1.0 } else { -1.0 };
                for (s, &j) in free.iter().enumerate() {
                    sys[(r, s)] = k[(i, j)];
                }
                sys[(r, f)] = 1.0;
                sys[(f, r)] = 1.0;
                rhs[r] = y[i]
                    - eps * sign
                    - (0..m)
                        .filter(|j| status[*j] < 3)
                        .map(|j| k[(i, j)] * beta[j])
                        .sum::<f64>();
            }
            rhs[f] = -(0..m).filter(|j| status[*j] < 3).map(|j| beta[j]).sum::<f64>();
            let Some(sol) = sys.lu().solve(&rhs) else { continue };
            let mut ok = true;
            for (r, &i) in free.iter().enumerate() {
                let v = sol[r];
                let in_range = if status[i] == 3 {
                    (0.0..=c).contains(&v)
                } else {
                    (-c..=0.0).contains(&v)
                };
                ok &= in_range;
                beta[i] = v;
            }
            if !ok {
                continue;
            }
        }
        if beta.iter().sum::<f64>().abs() < 1e-10 {
            best = best.max(svr_dual(k, y, eps, &beta));
        }
    }
    best
}

/// Principal-component scores of `x` via the eigendecomposition of the
/// feature covariance, descending by variance.
pub fn covariance_pca_scores(x: &[Vec<f64>], components: usize) -> DMatrix<f64> {
    let m = x.len();
    let d = x[0].len();
    let mut xm = DMatrix::from_fn(m, d, |i, j| x[i][j]);
    for j in 0..d {
        let mean = xm.column(j).mean();
        xm.column_mut(j).add_scalar_mut(-mean);
    }
    let cov = xm.transpose() * &xm;
    let eig = cov.symmetric_eigen();
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let mut scores = DMatrix::zeros(m, components);
    for (c, &idx) in order.iter().take(components).enumerate() {
        scores.set_column(c, &(&xm * eig.eigenvectors.column(idx)));
    }
    scores
}

/// Max entry difference after aligning each column's sign.
pub fn max_diff_up_to_sign(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (0..a.ncols())
        .map(|c| {
            let plus = (a.column(c) - b.column(c)).amax();
            let minus = (a.column(c) + b.column(c)).amax();
            plus.min(minus)
        })
        .fold(0.0, f64::max)
}
