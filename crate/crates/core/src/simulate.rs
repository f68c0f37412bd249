//! Forward simulation of presence/absence communities by clipping the
//! latent Gaussian field at zero.

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal, Uniform};
use serde::{Deserialize, Serialize};

use crate::error::{check_dims, invalid, Result};
use crate::inference::{CovariateRaster, Grid, NodeSummary, SurfaceGrid};
use crate::model::{cholesky_jittered, exp_covariance_matrix, pair_latent_params, LatentMode, ModelParams, PresenceData};
use crate::prob_core::cell_probs;
use crate::tables::log10_odds_ratio;

#[derive(Debug, Clone, PartialEq)]
pub struct SimulatedCommunity {
    pub data: PresenceData,
    /// Parameters with the simulated factor field in place of the input `w`.
    pub truth: ModelParams,
    pub z: DMatrix<f64>,
}

fn standard_normal_matrix<R: Rng + ?Sized>(n: usize, m: usize, rng: &mut R) -> DMatrix<f64> {
    DMatrix::from_fn(n, m, |_, _| StandardNormal.sample(rng))
}

/// Draws factors (independent exponential GPs when `spatial`, otherwise
/// i.i.d. standard normals), adds the noise and clips at zero. The `w` in
/// `params` is ignored.
pub fn simulate_community<R: Rng + ?Sized>(
    params: &ModelParams,
    coords: &[[f64; 2]],
    x: &DMatrix<f64>,
    spatial: bool,
    rng: &mut R,
) -> Result<SimulatedCommunity> {
    let n = coords.len();
    let (s, r) = (params.n_species(), params.r());
    check_dims("covariates", (n, params.n_covariates()), x.shape())?;
    let mut truth = params.clone();
    truth.w = DMatrix::zeros(n, r);
    truth.validate()?;

    let xi = standard_normal_matrix(n, r, rng);
    truth.w = if spatial && r > 0 {
        let k = exp_covariance_matrix(coords, params.phi)?;
        cholesky_jittered(&k, "GP")?.l() * xi
    } else {
        xi
    };
    let eps = standard_normal_matrix(n, s, rng) * params.sigma2_eps.sqrt();
    let z = x * truth.b.transpose() + &truth.w * truth.lambda.transpose() + eps;
    let y = z.map(|v| u8::from(v >= 0.0));
    let data = PresenceData::new(
        y,
        x.clone(),
        coords.to_vec(),
        (1..=s).map(|j| format!("sp{j}")).collect(),
        (1..=n).map(|i| format!("s{i}")).collect(),
    )?;
    Ok(SimulatedCommunity { data, truth, z })
}

/// `n` sites uniform on `[0, side]^2`.
pub fn uniform_sites<R: Rng + ?Sized>(n: usize, side: f64, rng: &mut R) -> Result<Vec<[f64; 2]>> {
    if !(side > 0.0) || !side.is_finite() {
        return Err(invalid(format!("site extent must be positive, got {side}")));
    }
    let u = Uniform::new(0.0, side).map_err(|e| invalid(e.to_string()))?;
    Ok((0..n).map(|_| [u.sample(rng), u.sample(rng)]).collect())
}

/// Intercept column followed by `p - 1` standard normal covariates.
pub fn gaussian_design<R: Rng + ?Sized>(n: usize, p: usize, rng: &mut R) -> Result<DMatrix<f64>> {
    if p == 0 {
        return Err(invalid("design needs at least the intercept column"));
    }
    let mut x = standard_normal_matrix(n, p, rng);
    x.column_mut(0).fill(1.0);
    Ok(x)
}

/// Loadings with the identifiability constraint: entries N(0, scale^2),
/// zeros above the diagonal of the top block, absolute values on its diagonal.
pub fn constrained_loadings<R: Rng + ?Sized>(s: usize, r: usize, scale: f64, rng: &mut R) -> DMatrix<f64> {
    let mut l = standard_normal_matrix(s, r, rng) * scale;
    for j in 0..r.min(s) {
        l[(j, j)] = l[(j, j)].abs().max(1e-3);
        for h in (j + 1)..r {
            l[(j, h)] = 0.0;
        }
    }
    l
}

/// Odds-ratio surface of the true parameters: marginal latent moments at
/// each node with raster covariates. Each node's summary is the single value.
pub fn true_odds_surface(
    params: &ModelParams,
    grid: &Grid,
    raster: &CovariateRaster,
    j: usize,
    k: usize,
) -> Result<SurfaceGrid> {
    let nodes = grid.nodes();
    let summaries = nodes
        .iter()
        .map(|&node| {
            let Some(x) = raster.lookup(node) else { return Ok(None) };
            let t = cell_probs(pair_latent_params(params, &x, None, j, k, LatentMode::Marginal)?)?;
            let lt = log10_odds_ratio(&t)?;
            Ok(Some(NodeSummary {
                mean_log10_theta: lt,
                q05: lt,
                q95: lt,
                p_exceed: if lt.signum() > 0 { 1.0 } else { 0.0 },
                p11_mean: t.p11() / t.total(),
                p00_mean: t.p00() / t.total(),
            }))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SurfaceGrid { pair: (j, k), grid: Some(*grid), nodes, summaries })
}

/// Ground truth written next to simulated data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub params: ModelParams,
    pub spatial: bool,
    pub h: DMatrix<f64>,
    pub species_names: Vec<String>,
}
