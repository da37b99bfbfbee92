//! Image reconstruction from undersampled Fourier measurements with a
//! non-convex shrinkage penalty on the singular values of the image Hessian.
//!
//! The solver splits the problem into a projection, a per-pixel spectral
//! shrinkage, and an exact Fourier-domain linear solve (ADMM). Convex Hessian
//! Schatten (HS-1, HS-2) and total-variation baselines share the same skeleton.

pub mod admm;
pub mod diffops;
pub mod error;
pub mod fft;
pub mod forward;
pub mod image;
pub mod io;
pub mod mask;
pub mod metrics;
pub mod phantom;
pub mod shrink;
pub mod spectral;
pub mod tune;

pub use admm::{
    objective, solve, ConstraintSet, Method, ReconResult, SolverConfig, SolverState,
};
pub use diffops::{hessian_adjoint, hessian_apply, hessian_symbol, FourierDiagonal};
pub use error::{Error, Result};
pub use forward::{forward_adjoint, forward_apply, simulate_measurement, NoiseSpec};
pub use image::{HessianField, Image, KSpace, Mask, Matrix2};
pub use mask::{make_mask, MaskKind, MaskSpec};
pub use metrics::{mse, ssim, SsimParams};
pub use shrink::{gq_derivative, gq_value, scalar_shrink, shrink_threshold, ShrinkParams, ShrinkRule};
pub use spectral::{
    hs1_matrix_prox, hs2_matrix_prox, qshs_matrix_prox, qshs_penalty, svd2x2, tv1_vector_prox,
    Svd2,
};
pub use tune::{golden_section_tune, TuneObjective, TuneSpec};

pub use rustfft::num_complex::Complex64;
