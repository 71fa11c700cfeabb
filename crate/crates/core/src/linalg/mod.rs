//! Small dense matrix kernel: exact-rational and floating matrices,
//! exponential, unipotent logarithm, eigenstructure with clustering,
//! and orthonormalization.

pub mod cplx;
pub mod eig;
pub mod exact;
pub mod exp;
pub mod float;
pub mod invariant;
pub mod mat;

pub use eig::{eigenclusters, EigenCluster};
pub use exp::mat_exp;
pub use float::{operator_norm, orthonormalize};
pub use invariant::refine_invariant;
pub use log::unipotent_log;
pub use mat::{CMat, FMat, Mat, Matrix, Mode, QMat};

pub mod log;
