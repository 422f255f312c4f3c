//! Kernel matrices shared by the quantum and classical kernels.

use std::sync::OnceLock;

use nalgebra::DMatrix;
use rayon::ThreadPool;

use crate::error::{Error, Result};

/// Symmetric matrix of pairwise kernel values over one point set.
#[derive(Clone, Debug, PartialEq)]
pub struct GramMatrix {
    values: DMatrix<f64>,
    kernel_id: String,
}

impl GramMatrix {
    pub fn new(values: DMatrix<f64>, kernel_id: impl Into<String>) -> Result<Self> {
        if values.nrows() != values.ncols() || values.nrows() == 0 {
            return Err(Error::Dimension(format!(
                "Gram matrix must be square and non-empty, got {}x{}",
                values.nrows(),
                values.ncols()
            )));
        }
        Ok(GramMatrix {
            values,
            kernel_id: kernel_id.into(),
        })
    }

    /// Builds from row vectors; handy in tests and for precomputed kernels.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let m = rows.len();
        if rows.iter().any(|r| r.len() != m) {
            return Err(Error::Dimension("Gram rows must form a square matrix".into()));
        }
        Self::new(DMatrix::from_fn(m, m, |i, j| rows[i][j]), "precomputed")
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn into_values(self) -> DMatrix<f64> {
        self.values
    }

    pub fn kernel_id(&self) -> &str {
        &self.kernel_id
    }

    pub fn point_count(&self) -> usize {
        self.values.nrows()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[(i, j)]
    }

    pub fn max_asymmetry(&self) -> f64 {
        let m = self.point_count();
        let mut worst: f64 = 0.0;
        for i in 0..m {
            for j in i + 1..m {
                worst = worst.max((self.values[(i, j)] - self.values[(j, i)]).abs());
            }
        }
        worst
    }

    pub fn min_eigenvalue(&self) -> f64 {
        let sym = (&self.values + self.values.transpose()) * 0.5;
        sym.symmetric_eigenvalues().min()
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        self.values.row_iter().map(|r| r.iter().copied().collect()).collect()
    }
}

/// Anything that can produce Gram and cross-Gram matrices over raw feature vectors.
pub trait Kernel {
    fn gram(&self, points: &[Vec<f64>]) -> Result<GramMatrix>;

    /// `|test| x |train|` matrix of `k(test_i, train_j)`.
    fn cross_gram(&self, test: &[Vec<f64>], train: &[Vec<f64>]) -> Result<DMatrix<f64>>;
}

/// Worker pool for kernel evaluation, sized by `QKFLOW_THREADS` (0 or unset = auto).
pub(crate) fn pool() -> &'static ThreadPool {
    static POOL: OnceLock<ThreadPool> = OnceLock::new();
    POOL.get_or_init(|| {
        let threads = std::env::var("QKFLOW_THREADS")
            .ok()
            .and_then(|v| v.trim().parse::<usize>().ok())
            .unwrap_or(0);
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .thread_name(|i| format!("qkflow-kernel-{i}"))
            .build()
            .expect("kernel thread pool")
    })
}

pub(crate) fn check_points(points: &[Vec<f64>], what: &str) -> Result<usize> {
    let first = points
        .first()
        .ok_or_else(|| Error::Argument(format!("{what} point list is empty")))?;
    let d = first.len();
    if d == 0 {
        return Err(Error::Dimension(format!("{what} points have no features")));
    }
    for (i, p) in points.iter().enumerate() {
        if p.len() != d {
            return Err(Error::Dimension(format!(
                "{what} point {i} has {} features, expected {d}",
                p.len()
            )));
        }
        if p.iter().any(|v| !v.is_finite()) {
            return Err(Error::Argument(format!("{what} point {i} has non-finite entries")));
        }
    }
    Ok(d)
}
