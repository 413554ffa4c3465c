//! Projection pursuit for matrix-valued data.
//!
//! Observations are `p × q` matrices `X_i`, projected to scalars through
//! rank-1 tensor projections `u'X_i v` with `u`, `v` on the unit spheres.
//! The kurtosis of these projections is optimized to find directions that
//! separate the components of a two-group mixture without label
//! information, and the extracted pairs are assembled into an estimate of
//! the optimal linear discriminant matrix `W = A⁻¹(T₂ − T₁)B⁻¹`.
//!
//! Module map:
//!
//! - [`model`]: matrix-normal mixtures, samplers and closed-form population
//!   quantities.
//! - [`indices`]: sample projection indices, their gradients and the
//!   constraint matrices used for sequential extraction.
//! - [`optimizer`]: multi-start Barzilai–Borwein descent on the product of
//!   spheres with deflation, plus the alternating (flip-flop) variant.
//! - [`estimator`]: back-transformation of kurtosis values into the
//!   discriminant estimate.
//! - [`eval`]: similarity metrics, 1-D clustering and second-order
//!   baselines.

// `!(x > 0.0)` is used on purpose so that NaN fails the check.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod estimator;
pub mod eval;
pub mod indices;
pub mod linalg;
pub mod model;
pub mod optimizer;
pub mod seed;

pub use error::{MppError, Result};
pub use estimator::{reconstruct_w_lda, ExtractionResult};
pub use indices::{center, kappa_sample, ConstraintSet, ProjectionPair};
pub use model::{MatrixNormalParams, MatrixSample, MixingRegime, MixtureParams};
pub use optimizer::{extract_sequence, flipflop_extract, Direction, OptimizerConfig};

pub use nalgebra;
