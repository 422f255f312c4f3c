//! Kernel machines that consume precomputed Gram matrices.

mod kmeans;
mod kpca;
mod krr;
mod svc;
mod svr;

pub use kmeans::{kernel_kmeans, KMeansResult};
pub use kpca::{center_gram, kpca_fit, KpcaModel};
pub use krr::{krr_fit, TrainedKRR};
pub use svc::{dual_objective, svc_fit, svc_fit_with, SvcOptions, TrainedSVC, SUPPORT_TOL};
pub use svr::{svr_fit, svr_fit_with, SvrOptions, TrainedSVR};

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::gram::GramMatrix;

/// Eigenvalues at or below this are treated as zero when determining numerical rank.
pub const RANK_TOL: f64 = 1e-10;

/// Largest tolerated `|K_ij - K_ji|` for matrices handed to the solvers.
pub const SYMMETRY_TOL: f64 = 1e-8;

pub(crate) fn check_symmetric(k: &GramMatrix) -> Result<()> {
    let asym = k.max_asymmetry();
    if !(asym <= SYMMETRY_TOL) {
        return Err(Error::InvalidKernel(format!(
            "Gram matrix asymmetry {asym:e} exceeds {SYMMETRY_TOL:e}"
        )));
    }
    if k.values().iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidKernel("Gram matrix has non-finite entries".into()));
    }
    Ok(())
}

pub(crate) fn check_cross(k_test: &DMatrix<f64>, m: usize) -> Result<()> {
    if k_test.ncols() != m {
        return Err(Error::Dimension(format!(
            "cross-kernel has {} columns, model was trained on {m} points",
            k_test.ncols()
        )));
    }
    Ok(())
}

/// `sign` with ties broken toward `+1`.
pub fn sign(v: f64) -> f64 {
    if v >= 0.0 {
        1.0
    } else {
        -1.0
    }
}
