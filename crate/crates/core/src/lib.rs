//! Numerical laboratory for depth-indexed Dirichlet-to-Neumann maps on
//! warped-product model manifolds, the tensor evolution they generate, and the
//! diagonal-source boundary value problem built on top of them.
//!
//! Everything numerical is generic over [`Real`] (`f32` or `f64`); the aliases
//! at the bottom of this file fix `f64`, which every scenario uses.

// `!(x > 0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod dnmap;
pub mod error;
pub mod evolution;
pub mod evosq;
pub mod exhaustion;
pub mod geometry;
pub mod io;
pub mod linalg;
pub mod oducp_probe;
pub mod potential;
pub mod scenario;
pub mod source_bvp;
mod scalar;
pub mod stencil;

pub use error::{Error, Result};
pub use scalar::Real;

pub type Geometry = geometry::WarpedGeometry<f64>;
pub type Mat = linalg::Matrix<f64>;
