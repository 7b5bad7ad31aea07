//! Point clouds on zero-level sets of bandlimited functions.
//!
//! Points `x` on the unit torus that satisfy `psi(x) = 0` for a
//! trigonometric polynomial `psi` have exponential feature maps living in a
//! low-dimensional subspace. This crate exposes that structure through
//! shift-invariant kernels and uses it to fit potentials, denoise clouds and
//! recover undersampled image series with a kernel nuclear-norm penalty
//! minimized by iteratively reweighted least squares.
//!
//! ```
//! use lskr::{cube_support, fit_surface, sample_surface, ShapeSpec};
//!
//! let shape = ShapeSpec::cos_curve(1.0);
//! let cloud = sample_surface(&shape, 60, 1).unwrap();
//! let model = fit_surface(&cloud, &cube_support(2, 1).unwrap(), None, 1e-8).unwrap();
//! assert_eq!(model.nullspace_dim(), 1);
//! ```

pub mod error;
pub mod features;
pub mod geometry;
pub mod io;
pub mod irls;
pub mod kernel;
pub mod linalg;
pub mod metrics;
pub mod operators;
pub mod surface;
pub mod synth;

pub use error::{Error, Result};
pub use features::{annihilation_residual, feature_map, feature_matrix, feature_weights, FeatureMatrix};
pub use geometry::{
    coefficient_correlation, cube_support, translate_count, wrap_coord, wrap_point, FourierCoeffs, KernelSpec, Point,
    PointCloud, SupportSet,
};
pub use irls::{
    build_laplacian, irls_recover, nuclear_norm_estimate, q_update, solve_subproblem, surrogate_gradient,
    surrogate_gradient_check, two_step_recover, IrlsConfig, IrlsState, IterationRecord, TwoStepResult,
};
pub use kernel::{gram_matrix, kernel_eval, kernel_rank_profile, GramMatrix, RankProfile};
pub use metrics::{curve_distance, relative_error, EvalReport};
pub use operators::{center_kspace_op, variable_density_masks, MeasurementOp, OpKind};
pub use surface::{
    eval_potential, extract_levelset_2d, fit_surface, gram_q, levelset_of_coeffs, sos_potential, Polyline, SurfaceModel,
};
pub use synth::{add_noise, make_dynamic_series, sample_surface, DynSeriesSpec, ShapeSpec};
