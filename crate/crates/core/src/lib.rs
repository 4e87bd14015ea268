//! Discretization of h(x)u + p.v.∫_{Ω(x)} (u(x) − u(y)) |x − y|^{−N−2s} dy on
//! uniform grids, with elliptic, spectral and parabolic solvers and the
//! sup/inf-convolution toolkit.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod elliptic;
pub mod error;
pub mod geometry;
pub mod linalg;
pub mod operator;
pub mod parabolic;
pub mod spectral;
pub mod verify;
pub mod vistools;

pub use error::{Error, Result};
