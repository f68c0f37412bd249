//! Gaussian probability kernels: univariate and bivariate normal CDFs,
//! quantiles, truncated-normal sampling and the 2x2 orthant cells.

mod bvn;
mod normal;
mod truncated;

pub use bvn::{bvn_cdf, cell_probs, ln_bvn_cdf, BvnParams, LOG_ROUTE_THRESHOLD};
pub use normal::{
    ln_std_normal_cdf, ln_std_normal_pdf, std_normal_cdf, std_normal_pdf, std_normal_quantile,
};
pub use truncated::sample_truncated_normal;

pub(crate) use bvn::{bvn_unchecked, ln_orthant};
pub(crate) use normal::{phi, quantile_unchecked};
pub(crate) use truncated::sample_unchecked as sample_truncated_unchecked;
