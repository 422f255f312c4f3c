//! Variational quantum kernel toolkit.
//!
//! Exact statevector simulation of trainable feature-encoding circuits,
//! quantum kernels via the inversion and swap tests, kernel alignment with
//! SPSA, metric-learned Gaussian kernels, and the kernel machines that
//! consume them (SVC, SVR, KRR, kernel PCA, kernel k-means).

// `!(x > 0.0)` style checks are used on purpose so NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod classical_kernels;
pub mod cli;
pub mod error;
pub mod featuremap;
pub mod gram;
pub mod kernel_methods;
pub mod qkernel;
pub mod serde_matrix;
pub mod statevector;
pub mod training;

pub use error::{Error, Result};
pub use gram::{GramMatrix, Kernel};
