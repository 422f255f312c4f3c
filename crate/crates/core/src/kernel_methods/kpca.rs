//! Kernel principal component analysis.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{check_cross, check_symmetric, RANK_TOL};
use crate::error::{Error, Result};
use crate::gram::GramMatrix;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KpcaModel {
    /// Retained eigenvalues of the centered Gram matrix, descending.
    pub eigenvalues: Vec<f64>,
    /// Eigenvectors as columns, each divided by `√λ`, so that projecting a
    /// centered kernel row gives unit-scaled scores.
    #[serde(with = "crate::serde_matrix")]
    pub projection: DMatrix<f64>,
    /// Column means of the training Gram matrix.
    pub train_col_means: Vec<f64>,
    pub train_mean: f64,
    pub n_components: usize,
    pub kernel_id: String,
}

/// `K' = K − 1K/m − K1/m + 1K1/m²`.
pub fn center_gram(k: &DMatrix<f64>) -> DMatrix<f64> {
    let m = k.nrows();
    let col_means: Vec<f64> = (0..m).map(|j| k.column(j).mean()).collect();
    let row_means: Vec<f64> = (0..m).map(|i| k.row(i).mean()).collect();
    let mean = k.mean();
    DMatrix::from_fn(m, m, |i, j| k[(i, j)] - col_means[j] - row_means[i] + mean)
}

pub fn kpca_fit(k: &GramMatrix, n_components: usize) -> Result<KpcaModel> {
    if n_components == 0 {
        return Err(Error::Argument("n_components must be >= 1".into()));
    }
    check_symmetric(k)?;
    let kv = k.values();
    let m = kv.nrows();
    let centered = center_gram(kv);
    let centered = (&centered + centered.transpose()) * 0.5;
    let eig = centered.symmetric_eigen();
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let available = order.iter().take_while(|&&i| eig.eigenvalues[i] > RANK_TOL).count();
    if n_components > available {
        return Err(Error::Rank(format!(
            "requested {n_components} components, centered kernel has numerical rank {available}"
        )));
    }
    let mut projection = DMatrix::zeros(m, n_components);
    let mut eigenvalues = Vec::with_capacity(n_components);
    for (c, &idx) in order.iter().take(n_components).enumerate() {
        let lambda = eig.eigenvalues[idx];
        let mut v: DVector<f64> = eig.eigenvectors.column(idx).into_owned();
        // Deterministic sign: largest-magnitude entry positive.
        let pivot = v.iamax();
        if v[pivot] < 0.0 {
            v.neg_mut();
        }
        projection.set_column(c, &(v / lambda.sqrt()));
        eigenvalues.push(lambda);
    }
    Ok(KpcaModel {
        eigenvalues,
        projection,
        train_col_means: (0..m).map(|j| kv.column(j).mean()).collect(),
        train_mean: kv.mean(),
        n_components,
        kernel_id: k.kernel_id().to_string(),
    })
}

impl KpcaModel {
    /// Projects rows of a `test x train` cross-kernel onto the components.
    pub fn transform(&self, k_rows: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        let m = self.train_col_means.len();
        check_cross(k_rows, m)?;
        let centered = DMatrix::from_fn(k_rows.nrows(), m, |i, j| {
            k_rows[(i, j)] - self.train_col_means[j] - k_rows.row(i).mean() + self.train_mean
        });
        Ok(centered * &self.projection)
    }
}
