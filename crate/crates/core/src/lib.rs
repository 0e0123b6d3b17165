//! Multivariate Chebyshev inequalities and the confidence regions they
//! induce.
//!
//! The classical vector inequality bounds `Pr{‖X−μ‖ ≥ ε}` by `tr(Σ)/ε²`
//! and yields a sphere; the Mahalanobis form bounds
//! `Pr{(X−μ)ᵀΣ⁻¹(X−μ) ≥ ε}` by `n/ε` and yields an ellipsoid that is never
//! larger. This crate builds both regions, computes their volume ratio, and
//! checks the bounds by seeded Monte Carlo.

// NaN must fail range checks, which `!(x > 0.0)` does and `x <= 0.0` does not.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod experiments;
pub mod linalg;
pub mod moments;
pub mod regions;
pub mod sampler;
pub mod special;

pub use error::{Error, Result};
pub use linalg::{CovarianceMatrix, PrecisionMatrix, SquareMatrix, Vector};
pub use moments::{Ddof, MomentEstimate, SampleSet};
pub use regions::{BoundValue, EllipsoidRegion, Region, SphereRegion};
pub use sampler::{RandomStream, SamplerKind, SamplerSpec};
