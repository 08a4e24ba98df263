//! Renormalization of Jacobi matrices by real polynomials with real Julia sets.

// `!(x <= tol)` is used on purpose so that NaN fails every check.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod darboux;
pub mod error;
pub mod jacobi;
pub mod limitper;
pub mod measures;
pub mod poly;
pub mod renorm;
pub mod spectral;

pub use error::{Error, Result};
pub use jacobi::{Distance, JacobiWindow, TailModel};
pub use poly::{HyperbolicPoly, Normalization, Poly, PolySequence, PolySpec};
pub use renorm::{BlockSpec, BranchVector, DiscreteMeasure};

/// Crate version, recorded in run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
