//! Dimension-reduced spatial joint species distribution model (latent
//! multivariate probit with Gaussian-process factors) and the pairwise
//! dependence functionals derived from it: odds-ratio and joint-occurrence
//! surfaces, richness moments, homogeneity odds and ordinal odds ratios.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::excessive_precision)]

pub mod error;
pub mod fmt;
pub mod inference;
pub mod model;
pub mod ordinal;
pub mod prob_core;
pub mod sampler;
pub mod simulate;
pub mod tables;

pub use error::{Error, Result};
pub use fmt::format_float;

/// Library version.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
