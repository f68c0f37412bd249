//! Posterior functionals of a fitted chain: pairwise tables and odds-ratio
//! surfaces, factor kriging, richness moments and homogeneity odds.
//!
//! Everything here is a pure function of stored draws. Parallel loops run
//! over nodes or draws and collect in index order; any randomness (Monte
//! Carlo tables, kriging draws) comes from a stream keyed by the node index,
//! so results do not depend on the thread count.

mod grid;
mod kriging;
mod richness;

pub use grid::{extended_mean, quantile_sorted, CovariateRaster, Grid, NodeSummary, SurfaceGrid};
pub use kriging::{krige_factors, KrigedFactors, Kriger, KrigingWeights};
pub use richness::{marginal_presence_means, richness_draw_moments, richness_stats, RichnessSummary};

use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::model::{pair_latent_params, LatentMode};
use crate::prob_core::{cell_probs, ln_std_normal_cdf, BvnParams};
use crate::sampler::{Draw, PosteriorDraws};
use crate::tables::{log10_odds_ratio, Extended, PairTable};
use kriging::check_stored_w;

/// Where a functional is evaluated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Location {
    /// A data site, by row index; its covariates and stored factors are used.
    Site(usize),
    /// Any point with its covariate vector (intercept included).
    Point { coords: [f64; 2], x: Vec<f64> },
}

/// How a draw's 2x2 table is computed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PairMethod {
    /// Bivariate normal orthants at the marginal latent moments.
    Analytic,
    /// Frequencies of simulated latent pairs at the marginal moments.
    MonteCarlo,
    /// Products of univariate probabilities given factor values, averaged
    /// over the stored (data site) or kriged (new point) factors.
    Conditional,
}

impl std::str::FromStr for PairMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "analytic" => Ok(Self::Analytic),
            "mc" | "monte-carlo" | "monte_carlo" => Ok(Self::MonteCarlo),
            "conditional" => Ok(Self::Conditional),
            other => Err(invalid(format!("unknown method {other:?} (analytic, mc, conditional)"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MethodOptions {
    pub method: PairMethod,
    /// Latent pairs simulated per draw by the Monte Carlo method.
    pub mc_samples: usize,
    /// Factor draws averaged per posterior draw by the conditional method at new points.
    pub krige_samples: usize,
    pub seed: u64,
}

impl Default for MethodOptions {
    fn default() -> Self {
        Self { method: PairMethod::Analytic, mc_samples: 10_000, krige_samples: 100, seed: 0 }
    }
}

impl MethodOptions {
    pub fn validate(&self) -> Result<()> {
        if self.mc_samples == 0 || self.krige_samples == 0 {
            return Err(invalid("mc_samples and krige_samples must be positive"));
        }
        Ok(())
    }
}

fn check_pair(draws: &PosteriorDraws, j: usize, k: usize) -> Result<()> {
    let s = draws.n_species();
    if j >= s || k >= s || j == k {
        return Err(invalid(format!("invalid species pair ({j}, {k}) for {s} species")));
    }
    if draws.is_empty() {
        return Err(invalid("no posterior draws"));
    }
    Ok(())
}

fn location_x(draws: &PosteriorDraws, loc: &Location) -> Result<Vec<f64>> {
    match loc {
        Location::Site(i) => {
            if *i >= draws.n_sites() {
                return Err(invalid(format!("site index {i} out of range for {} sites", draws.n_sites())));
            }
            Ok(draws.site_covariates(*i))
        }
        Location::Point { x, .. } => {
            if x.len() != draws.x.ncols() {
                return Err(Error::Dimension {
                    context: "covariate vector",
                    expected: draws.x.ncols().to_string(),
                    found: x.len().to_string(),
                });
            }
            Ok(x.clone())
        }
    }
}

/// Source of factor values for the conditional method.
enum Factors<'a> {
    Stored(usize),
    Kriged { kriger: &'a Kriger, node: usize },
    Prior,
}

fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn mc_table(p: BvnParams, m: usize, rng: &mut ChaCha8Rng) -> Result<PairTable> {
    let s = (1.0 - p.rho * p.rho).max(0.0).sqrt();
    let mut counts = [0u64; 4];
    for _ in 0..m {
        let e1: f64 = StandardNormal.sample(rng);
        let e2: f64 = StandardNormal.sample(rng);
        let y1 = (p.mu1 + e1 >= 0.0) as usize;
        let y2 = (p.mu2 + p.rho * e1 + s * e2 >= 0.0) as usize;
        counts[2 * y1 + y2] += 1;
    }
    let m = m as f64;
    PairTable::new(counts[0] as f64 / m, counts[1] as f64 / m, counts[2] as f64 / m, counts[3] as f64 / m)
}

fn conditional_table(
    draw: &Draw,
    x: &[f64],
    j: usize,
    k: usize,
    factors: &Factors<'_>,
    n_samples: usize,
    rng: &mut ChaCha8Rng,
) -> Result<PairTable> {
    let r = draw.params.r();
    let single = |w: &[f64]| {
        let p = pair_latent_params(&draw.params, x, Some(w), j, k, LatentMode::Conditional)?;
        cell_probs(p)
    };
    let (mean, sd) = match factors {
        Factors::Stored(i) => {
            let w: Vec<f64> = draw.params.w.row(*i).iter().copied().collect();
            return single(&w);
        }
        Factors::Kriged { kriger, node } => {
            let kw = kriger.weights(draw.params.phi);
            (kw.mean_at(&draw.params.w, *node), kw.sd[*node])
        }
        Factors::Prior => (DVector::zeros(r), 1.0),
    };
    if sd == 0.0 {
        return single(mean.as_slice());
    }
    let mut acc: [Vec<f64>; 4] = std::array::from_fn(|_| Vec::with_capacity(n_samples));
    let mut w = vec![0.0; r];
    for _ in 0..n_samples {
        for (h, v) in w.iter_mut().enumerate() {
            let xi: f64 = StandardNormal.sample(rng);
            *v = mean[h] + sd * xi;
        }
        let p = pair_latent_params(&draw.params, x, Some(&w), j, k, LatentMode::Conditional)?;
        let (a1, a0) = (ln_std_normal_cdf(p.mu1), ln_std_normal_cdf(-p.mu1));
        let (b1, b0) = (ln_std_normal_cdf(p.mu2), ln_std_normal_cdf(-p.mu2));
        acc[0].push(a0 + b0);
        acc[1].push(a0 + b1);
        acc[2].push(a1 + b0);
        acc[3].push(a1 + b1);
    }
    let ln_n = (n_samples as f64).ln();
    PairTable::from_ln_cells(acc.map(|v| ln_mean_exp(&v, ln_n)))
}

fn ln_mean_exp(v: &[f64], ln_n: f64) -> f64 {
    let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + v.iter().map(|x| (x - max).exp()).sum::<f64>().ln() - ln_n
}

fn draw_table(
    draw: &Draw,
    x: &[f64],
    j: usize,
    k: usize,
    opts: &MethodOptions,
    factors: &Factors<'_>,
    rng: &mut ChaCha8Rng,
) -> Result<PairTable> {
    match opts.method {
        PairMethod::Analytic => {
            cell_probs(pair_latent_params(&draw.params, x, None, j, k, LatentMode::Marginal)?)
        }
        PairMethod::MonteCarlo => {
            let p = pair_latent_params(&draw.params, x, None, j, k, LatentMode::Marginal)?;
            mc_table(p, opts.mc_samples, rng)
        }
        PairMethod::Conditional => conditional_table(draw, x, j, k, factors, opts.krige_samples, rng),
    }
}

fn tables_at(
    draws: &PosteriorDraws,
    x: &[f64],
    j: usize,
    k: usize,
    opts: &MethodOptions,
    factors: &Factors<'_>,
    stream: u64,
) -> Result<Vec<PairTable>> {
    let mut rng = rng_for(opts.seed, stream);
    draws.draws.iter().map(|d| draw_table(d, x, j, k, opts, factors, &mut rng)).collect()
}

/// One 2x2 table per posterior draw for species `j` and `k` at `loc`.
pub fn pair_table_draws(
    draws: &PosteriorDraws,
    loc: &Location,
    j: usize,
    k: usize,
    opts: &MethodOptions,
) -> Result<Vec<PairTable>> {
    check_pair(draws, j, k)?;
    opts.validate()?;
    let x = location_x(draws, loc)?;
    let kriger;
    let factors = match (opts.method, loc) {
        (PairMethod::Conditional, Location::Site(i)) => {
            for d in &draws.draws {
                check_stored_w(draws, d)?;
            }
            Factors::Stored(*i)
        }
        (PairMethod::Conditional, Location::Point { coords, .. }) if draws.config.spatial => {
            kriger = Kriger::new(draws, &[*coords])?;
            Factors::Kriged { kriger: &kriger, node: 0 }
        }
        _ => Factors::Prior,
    };
    tables_at(draws, &x, j, k, opts, &factors, 0)
}

fn node_covariates(draws: &PosteriorDraws, raster: &CovariateRaster, nodes: &[[f64; 2]]) -> Result<Vec<Option<Vec<f64>>>> {
    if raster.n_covariates() != draws.x.ncols() {
        return Err(Error::Dimension {
            context: "covariate raster",
            expected: draws.x.ncols().to_string(),
            found: raster.n_covariates().to_string(),
        });
    }
    Ok(nodes.par_iter().map(|n| raster.lookup(*n)).collect())
}

fn node_kriger(draws: &PosteriorDraws, nodes: &[[f64; 2]], opts: &MethodOptions) -> Result<Option<Kriger>> {
    if opts.method == PairMethod::Conditional && draws.config.spatial {
        Ok(Some(Kriger::new(draws, nodes)?))
    } else {
        Ok(None)
    }
}

/// Per-node, per-draw log10 odds ratios (`None` for masked nodes).
pub fn log10_theta_draws(
    draws: &PosteriorDraws,
    nodes: &[[f64; 2]],
    raster: &CovariateRaster,
    j: usize,
    k: usize,
    opts: &MethodOptions,
) -> Result<Vec<Option<Vec<Extended>>>> {
    check_pair(draws, j, k)?;
    opts.validate()?;
    let covs = node_covariates(draws, raster, nodes)?;
    let kriger = node_kriger(draws, nodes, opts)?;
    covs.par_iter()
        .enumerate()
        .map(|(m, x)| {
            let Some(x) = x else { return Ok(None) };
            let factors = kriger.as_ref().map_or(Factors::Prior, |kr| Factors::Kriged { kriger: kr, node: m });
            let tables = tables_at(draws, x, j, k, opts, &factors, m as u64)?;
            tables.iter().map(log10_odds_ratio).collect::<Result<Vec<_>>>().map(Some)
        })
        .collect()
}

/// Posterior odds-ratio surface of species `j` and `k` over `nodes`, with
/// covariates looked up in `raster`.
pub fn odds_surface_at(
    draws: &PosteriorDraws,
    nodes: &[[f64; 2]],
    raster: &CovariateRaster,
    j: usize,
    k: usize,
    opts: &MethodOptions,
) -> Result<SurfaceGrid> {
    check_pair(draws, j, k)?;
    opts.validate()?;
    let covs = node_covariates(draws, raster, nodes)?;
    let kriger = node_kriger(draws, nodes, opts)?;
    let summaries = covs
        .par_iter()
        .enumerate()
        .map(|(m, x)| {
            let Some(x) = x else { return Ok(None) };
            let factors = kriger.as_ref().map_or(Factors::Prior, |kr| Factors::Kriged { kriger: kr, node: m });
            let tables = tables_at(draws, x, j, k, opts, &factors, m as u64)?;
            let lt = tables.iter().map(log10_odds_ratio).collect::<Result<Vec<_>>>()?;
            let p11: Vec<f64> = tables.iter().map(|t| t.p11() / t.total()).collect();
            let p00: Vec<f64> = tables.iter().map(|t| t.p00() / t.total()).collect();
            Ok(Some(grid::summarize(&lt, &p11, &p00)))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SurfaceGrid { pair: (j, k), grid: None, nodes: nodes.to_vec(), summaries })
}

/// [`odds_surface_at`] over the nodes of a regular grid.
pub fn odds_surface(
    draws: &PosteriorDraws,
    grid: &Grid,
    raster: &CovariateRaster,
    j: usize,
    k: usize,
    opts: &MethodOptions,
) -> Result<SurfaceGrid> {
    let mut s = odds_surface_at(draws, &grid.nodes(), raster, j, k, opts)?;
    s.grid = Some(*grid);
    Ok(s)
}

/// Posterior draw of the homogeneity odds ratio.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HomogeneityDraw {
    pub gamma: Extended,
    pub log10_gamma: Extended,
}

/// `gamma = (p_j / (1 - p_j)) / (p_k / (1 - p_k))` per draw, from the
/// marginal presence probabilities at `loc`.
pub fn homogeneity_odds(
    draws: &PosteriorDraws,
    loc: &Location,
    j: usize,
    k: usize,
) -> Result<Vec<HomogeneityDraw>> {
    check_pair(draws, j, k)?;
    let x = location_x(draws, loc)?;
    draws
        .draws
        .iter()
        .map(|d| {
            let p = pair_latent_params(&d.params, &x, None, j, k, LatentMode::Marginal)?;
            let ln_odds = |mu: f64| ln_std_normal_cdf(mu) - ln_std_normal_cdf(-mu);
            let ln_gamma = ln_odds(p.mu1) - ln_odds(p.mu2);
            let gamma = ln_gamma.exp();
            Ok(HomogeneityDraw {
                gamma: if gamma.is_finite() { Extended::from_f64(gamma)? } else { Extended::PosInf },
                log10_gamma: Extended::from_f64(ln_gamma / std::f64::consts::LN_10)?,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests;
