//! Classical kernel functions: linear, polynomial, exponential and the
//! trainable-metric Gaussian `exp(-γ ‖A(x - x')‖²)`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gram::{check_points, GramMatrix, Kernel};

/// Slack allowed on `xᵀx' ≤ 1` for the exponential kernel to absorb rounding
/// on unit-normalized data.
const EXP_DOMAIN_SLACK: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ClassicalKernel {
    Linear {
        c: f64,
    },
    Polynomial {
        c: f64,
        degree: u32,
    },
    Exponential {
        sigma: f64,
    },
    GaussianMetric {
        gamma: f64,
        #[serde(with = "crate::serde_matrix")]
        transform: DMatrix<f64>,
    },
}

impl ClassicalKernel {
    pub fn linear(c: f64) -> Self {
        ClassicalKernel::Linear { c }
    }

    pub fn polynomial(c: f64, degree: u32) -> Self {
        ClassicalKernel::Polynomial { c, degree }
    }

    pub fn exponential(sigma: f64) -> Self {
        ClassicalKernel::Exponential { sigma }
    }

    pub fn gaussian_metric(gamma: f64, transform: DMatrix<f64>) -> Self {
        ClassicalKernel::GaussianMetric { gamma, transform }
    }

    /// Plain Gaussian of inverse width `gamma` on `dim` features (`A = I`).
    pub fn gaussian(gamma: f64, dim: usize) -> Self {
        Self::gaussian_metric(gamma, DMatrix::identity(dim, dim))
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            ClassicalKernel::Linear { c } | ClassicalKernel::Polynomial { c, .. } if !c.is_finite() => {
                Err(Error::Argument("kernel offset c must be finite".into()))
            }
            ClassicalKernel::Polynomial { degree: 0, .. } => {
                Err(Error::Argument("polynomial degree must be >= 1".into()))
            }
            ClassicalKernel::Exponential { sigma } if !(*sigma > 0.0 && sigma.is_finite()) => {
                Err(Error::Argument(format!("exponential sigma must be > 0, got {sigma}")))
            }
            ClassicalKernel::GaussianMetric { gamma, transform } => {
                if !(*gamma > 0.0 && gamma.is_finite()) {
                    return Err(Error::Argument(format!("gamma must be > 0, got {gamma}")));
                }
                if !transform.is_square() {
                    return Err(Error::Dimension(format!(
                        "metric transform must be square, got {}x{}",
                        transform.nrows(),
                        transform.ncols()
                    )));
                }
                if transform.iter().any(|v| !v.is_finite()) {
                    return Err(Error::Argument("metric transform has non-finite entries".into()));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    pub fn eval(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        if x.len() != y.len() {
            return Err(Error::Dimension(format!(
                "kernel inputs have {} and {} features",
                x.len(),
                y.len()
            )));
        }
        match self {
            ClassicalKernel::Linear { c } => Ok(dot(x, y) + c),
            ClassicalKernel::Polynomial { c, degree } => Ok((dot(x, y) + c).powi(*degree as i32)),
            ClassicalKernel::Exponential { sigma } => {
                let xy = dot(x, y);
                if xy > 1.0 + EXP_DOMAIN_SLACK {
                    return Err(Error::Domain(format!(
                        "exponential kernel needs xᵀx' <= 1, got {xy}; normalize inputs to the unit sphere"
                    )));
                }
                Ok((-sigma * (1.0 - xy).max(0.0).sqrt()).exp())
            }
            ClassicalKernel::GaussianMetric { gamma, transform } => {
                if transform.ncols() != x.len() {
                    return Err(Error::Dimension(format!(
                        "metric transform is {}x{}, inputs have {} features",
                        transform.nrows(),
                        transform.ncols(),
                        x.len()
                    )));
                }
                let diff = DVector::from_iterator(x.len(), x.iter().zip(y).map(|(a, b)| a - b));
                Ok((-gamma * (transform * diff).norm_squared()).exp())
            }
        }
    }
}

pub fn euclidean_distance(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::Dimension(format!(
            "distance between {}- and {}-dimensional vectors",
            x.len(),
            y.len()
        )));
    }
    Ok(x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt())
}

fn dot(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| a * b).sum()
}

impl Kernel for ClassicalKernel {
    fn gram(&self, points: &[Vec<f64>]) -> Result<GramMatrix> {
        self.validate()?;
        check_points(points, "training")?;
        let m = points.len();
        let mut k = DMatrix::zeros(m, m);
        for i in 0..m {
            for j in i..m {
                let v = self.eval(&points[i], &points[j])?;
                k[(i, j)] = v;
                k[(j, i)] = v;
            }
        }
        GramMatrix::new(k, serde_json::to_string(self).expect("kernel serializes"))
    }

    fn cross_gram(&self, test: &[Vec<f64>], train: &[Vec<f64>]) -> Result<DMatrix<f64>> {
        self.validate()?;
        check_points(test, "test")?;
        check_points(train, "training")?;
        let mut k = DMatrix::zeros(test.len(), train.len());
        for (i, a) in test.iter().enumerate() {
            for (j, b) in train.iter().enumerate() {
                k[(i, j)] = self.eval(a, b)?;
            }
        }
        Ok(k)
    }
}
