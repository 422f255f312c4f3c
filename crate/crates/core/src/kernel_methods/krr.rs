//! Kernel ridge regression: `(K + reg·I) α = y`, predictions `K_test α`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{check_cross, check_symmetric};
use crate::error::{Error, Result};
use crate::gram::GramMatrix;

/// Smallest Cholesky pivot (relative to the largest diagonal entry) accepted
/// before a system is declared singular.
const PIVOT_TOL: f64 = 1e-14;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainedKRR {
    pub alphas: Vec<f64>,
    pub reg: f64,
    pub kernel_id: String,
}

pub fn krr_fit(k: &GramMatrix, y: &[f64], reg: f64) -> Result<TrainedKRR> {
    let m = k.point_count();
    if y.len() != m {
        return Err(Error::Dimension(format!("{} targets for {m} kernel rows", y.len())));
    }
    if !(reg >= 0.0 && reg.is_finite()) {
        return Err(Error::Argument(format!("ridge coefficient must be >= 0, got {reg}")));
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::Argument("targets must be finite".into()));
    }
    check_symmetric(k)?;
    let mut a = k.values().clone();
    for i in 0..m {
        a[(i, i)] += reg;
    }
    let a = (&a + a.transpose()) * 0.5;
    let rhs = DVector::from_column_slice(y);
    let alphas = solve_spd(&a, &rhs)?;
    Ok(TrainedKRR {
        alphas: alphas.iter().copied().collect(),
        reg,
        kernel_id: k.kernel_id().to_string(),
    })
}

type Solver = Box<dyn Fn(&DVector<f64>) -> DVector<f64>>;

/// Cholesky solve with two rounds of iterative refinement. Falls back to a
/// pivoted LU for symmetric indefinite systems.
pub(crate) fn solve_spd(a: &DMatrix<f64>, b: &DVector<f64>) -> Result<DVector<f64>> {
    let scale = a.diagonal().amax().max(f64::MIN_POSITIVE);
    let solver: Solver = match a.clone().cholesky() {
        Some(ch) => {
            let min_pivot = ch.l_dirty().diagonal().iter().fold(f64::INFINITY, |m, v| m.min(v * v));
            if min_pivot < PIVOT_TOL * scale {
                return Err(Error::Singular(format!(
                    "kernel system is numerically singular (pivot {min_pivot:e}); use reg > 0"
                )));
            }
            Box::new(move |r| ch.solve(r))
        }
        None => {
            let lu = a.clone().full_piv_lu();
            if !lu.is_invertible() {
                return Err(Error::Singular("kernel system is singular; use reg > 0".into()));
            }
            let min_u = lu.u().diagonal().iter().fold(f64::INFINITY, |m, v| m.min(v.abs()));
            if min_u < PIVOT_TOL * scale {
                return Err(Error::Singular(
                    "kernel system is numerically singular; use reg > 0".into(),
                ));
            }
            Box::new(move |r| lu.solve(r).expect("invertible"))
        }
    };
    let mut x = solver(b);
    for _ in 0..2 {
        let r = b - a * &x;
        x += solver(&r);
    }
    Ok(x)
}

impl TrainedKRR {
    pub fn predict(&self, k_test: &DMatrix<f64>) -> Result<Vec<f64>> {
        check_cross(k_test, self.alphas.len())?;
        let alpha = DVector::from_column_slice(&self.alphas);
        Ok((k_test * alpha).iter().copied().collect())
    }
}
