//! Species richness moments at a location.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{location_x, Location};
use crate::error::{invalid, Result};
use crate::model::{pair_latent_params, LatentMode, ModelParams};
use crate::prob_core::{bvn_unchecked, phi};
use crate::sampler::PosteriorDraws;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RichnessSummary {
    /// Posterior mean of the expected richness.
    pub mean: f64,
    /// Posterior predictive variance of richness.
    pub variance: f64,
    /// The same with every pairwise covariance set to zero.
    pub independence_variance: f64,
    pub n_draws: usize,
}

/// Expected richness and its variance for one parameter state:
/// `(sum p_j, sum p_j(1-p_j) + 2 sum_{j<k} (p11_jk - p_j p_k), sum p_j(1-p_j))`.
pub fn richness_draw_moments(params: &ModelParams, x: &[f64]) -> Result<(f64, f64, f64)> {
    let s = params.n_species();
    let mu: Vec<f64> = (0..s).map(|j| params.fixed_effect(x, j) / params.marginal_sd(j)).collect();
    let p: Vec<f64> = mu.iter().map(|&m| phi(m)).collect();
    let mean: f64 = p.iter().sum();
    let indep: f64 = p.iter().map(|p| p * (1.0 - p)).sum();
    let mut cov = 0.0;
    for j in 0..s {
        for k in (j + 1)..s {
            let bp = pair_latent_params(params, x, None, j, k, LatentMode::Marginal)?;
            cov += bvn_unchecked(bp.mu1, bp.mu2, bp.rho) - p[j] * p[k];
        }
    }
    Ok((mean, indep + 2.0 * cov, indep))
}

/// Richness mean and variance, combining within-draw variances with the
/// between-draw variance of the expected richness.
pub fn richness_stats(draws: &PosteriorDraws, loc: &Location) -> Result<RichnessSummary> {
    if draws.is_empty() {
        return Err(invalid("no posterior draws"));
    }
    let x = location_x(draws, loc)?;
    let per_draw = draws
        .draws
        .par_iter()
        .map(|d| richness_draw_moments(&d.params, &x))
        .collect::<Result<Vec<_>>>()?;
    let nd = per_draw.len() as f64;
    let mean = per_draw.iter().map(|m| m.0).sum::<f64>() / nd;
    let between = per_draw.iter().map(|m| (m.0 - mean).powi(2)).sum::<f64>() / nd;
    let within = per_draw.iter().map(|m| m.1).sum::<f64>() / nd;
    let within_indep = per_draw.iter().map(|m| m.2).sum::<f64>() / nd;
    Ok(RichnessSummary {
        mean,
        variance: within + between,
        independence_variance: within_indep + between,
        n_draws: per_draw.len(),
    })
}

/// Posterior mean of each species' marginal presence probability at `loc`.
pub fn marginal_presence_means(draws: &PosteriorDraws, loc: &Location) -> Result<Vec<f64>> {
    if draws.is_empty() {
        return Err(invalid("no posterior draws"));
    }
    let x = location_x(draws, loc)?;
    let s = draws.n_species();
    let mut acc = vec![0.0; s];
    for d in &draws.draws {
        for (j, a) in acc.iter_mut().enumerate() {
            *a += phi(d.params.fixed_effect(&x, j) / d.params.marginal_sd(j));
        }
    }
    let nd = draws.len() as f64;
    Ok(acc.into_iter().map(|a| a / nd).collect())
}
