//! Dense numerical kernels: Hermitian eigendecomposition, SVD, and the
//! simplex / l1-ball projections.

mod eigen;
mod matrix;
mod projection;
mod svd;

pub use eigen::{
    eigen_range, eigh, eigh_warm, SpectralDecomposition, HERMITIAN_TOL, JACOBI_MAX_SWEEPS,
    JACOBI_TOL,
};
pub use matrix::DenseMatrix;
pub use projection::{project_l1_ball, project_simplex};
pub use svd::{singular_values, svd, Svd};
