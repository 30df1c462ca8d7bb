//! Time-series knockoff inference.
//!
//! Approximate model-X knockoffs are generated rowwise from a shrunk Gaussian
//! model, knockoff filters are run on interleaved subsamples of the series,
//! and the per-subsample e-values are averaged and passed through e-BH.
//!
//! The numerical core is generic over [`Real`] (`f32` or `f64`); the aliases
//! below fix the scalar to `f64`, which is what the simulation, diagnostics and
//! data-ingestion layers use.

pub mod diagnostics;
pub mod error;
pub mod filter;
pub mod forest;
pub mod fredmd;
pub mod knockoffs;
pub mod lasso;
pub mod numerics;
pub mod scalar;
pub mod simulate;

pub use error::{Error, Result};
pub use numerics::{Matrix, RngStream};
pub use scalar::Real;

pub type Matrix64 = Matrix<f64>;
pub type Matrix32 = Matrix<f32>;
pub type KnockoffModel64 = knockoffs::GaussianKnockoffModel<f64>;
pub type LassoConfig64 = lasso::LassoConfig<f64>;
pub type Forest64 = forest::Forest<f64>;
pub type SelectionResult64 = filter::SelectionResult<f64>;
pub type TskiConfig64 = filter::TskiConfig<f64>;
