//! Gibbs sampler for the latent factor probit model.
//!
//! One sweep updates, in this order: the latent `Z` by truncated-normal data
//! augmentation, the rows of `B`, the rows of `Lambda`, the factor field `W`
//! and (when a grid of candidates is configured) the decay `phi`.
//! `sigma2_eps` stays fixed at 1.

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{domain, invalid, Error, Result};
use crate::model::{
    assemble_sigma_star, check_loading_constraint, default_phi, GpEigen, ModelParams,
    PresenceData,
};
use crate::prob_core::{ln_std_normal_cdf, quantile_unchecked, sample_truncated_unchecked};

/// Upper limit on the number of decay candidates in a grid update.
pub const MAX_PHI_CANDIDATES: usize = 10;
/// Condition number of `X'X` above which the design counts as singular.
pub const MAX_DESIGN_CONDITION: f64 = 1e12;

/// How the GP decay is chosen.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PhiSpec {
    /// Effective range equal to half the largest inter-site distance.
    Default,
    Fixed(f64),
    /// Discrete uniform prior over the candidates, updated every sweep.
    Grid(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChainConfig {
    pub iterations: usize,
    pub burn_in: usize,
    pub thin: usize,
    pub r: usize,
    pub spatial: bool,
    pub phi: PhiSpec,
    pub prior_var_b: f64,
    pub prior_var_lambda: f64,
    pub seed: u64,
}

impl Default for ChainConfig {
    fn default() -> Self {
        Self {
            iterations: 10_000,
            burn_in: 5_000,
            thin: 1,
            r: 3,
            spatial: true,
            phi: PhiSpec::Default,
            prior_var_b: 100.0,
            prior_var_lambda: 1.0,
            seed: 0,
        }
    }
}

impl ChainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.burn_in >= self.iterations {
            return Err(invalid(format!(
                "burn_in ({}) must be smaller than iterations ({})",
                self.burn_in, self.iterations
            )));
        }
        if self.thin == 0 {
            return Err(invalid("thin must be at least 1"));
        }
        if self.r == 0 {
            return Err(invalid("factor count r must be at least 1"));
        }
        for (name, v) in [("prior_var_b", self.prior_var_b), ("prior_var_lambda", self.prior_var_lambda)] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(domain(format!("{name} must be positive and finite, got {v}")));
            }
        }
        match &self.phi {
            PhiSpec::Default => {}
            PhiSpec::Fixed(v) => check_phi(*v)?,
            PhiSpec::Grid(g) => {
                if g.is_empty() || g.len() > MAX_PHI_CANDIDATES {
                    return Err(invalid(format!(
                        "phi grid needs 1 to {MAX_PHI_CANDIDATES} candidates, got {}",
                        g.len()
                    )));
                }
                for &v in g {
                    check_phi(v)?;
                }
            }
        }
        Ok(())
    }

    /// Number of stored draws, `(iterations - burn_in) / thin`.
    pub fn n_stored(&self) -> usize {
        (self.iterations - self.burn_in) / self.thin
    }

    /// SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        sha256_hex(&serde_json::to_vec(self).expect("config serializes"))
    }

    /// Decay candidates and the index of the starting value.
    pub fn phi_candidates(&self, coords: &[[f64; 2]]) -> Result<(Vec<f64>, usize)> {
        match &self.phi {
            PhiSpec::Fixed(v) => Ok((vec![*v], 0)),
            PhiSpec::Default => Ok((vec![default_phi(coords)?], 0)),
            PhiSpec::Grid(g) => {
                let target = default_phi(coords)?.ln();
                let start = (0..g.len())
                    .min_by(|&a, &b| (g[a].ln() - target).abs().total_cmp(&(g[b].ln() - target).abs()))
                    .unwrap_or(0);
                Ok((g.clone(), start))
            }
        }
    }
}

fn check_phi(v: f64) -> Result<()> {
    if !(v > 0.0) || !v.is_finite() {
        return Err(domain(format!("phi must be positive and finite, got {v}")));
    }
    Ok(())
}

pub(crate) fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Fingerprint of the data a chain was run on.
pub fn data_hash(data: &PresenceData) -> String {
    let mut h = Sha256::new();
    h.update((data.n_sites() as u64).to_le_bytes());
    h.update((data.n_species() as u64).to_le_bytes());
    h.update((data.n_covariates() as u64).to_le_bytes());
    h.update(data.y().as_slice());
    for v in data.x().iter() {
        h.update(v.to_bits().to_le_bytes());
    }
    for c in data.coords() {
        h.update(c[0].to_bits().to_le_bytes());
        h.update(c[1].to_bits().to_le_bytes());
    }
    hex::encode(h.finalize())
}

/// Complete sampler state, including the random stream position.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainState {
    pub z: DMatrix<f64>,
    pub params: ModelParams,
    pub iteration: usize,
    /// Index of the current decay among the configured candidates.
    pub phi_index: usize,
    #[serde(with = "rng_serde")]
    pub rng: ChaCha8Rng,
}

mod rng_serde {
    use rand_chacha::ChaCha8Rng;
    use rand::SeedableRng;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    #[derive(Serialize, Deserialize)]
    struct RngState {
        seed: String,
        stream: u64,
        word_pos: String,
    }

    pub fn serialize<S: Serializer>(rng: &ChaCha8Rng, s: S) -> Result<S::Ok, S::Error> {
        RngState {
            seed: hex::encode(rng.get_seed()),
            stream: rng.get_stream(),
            word_pos: rng.get_word_pos().to_string(),
        }
        .serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<ChaCha8Rng, D::Error> {
        use serde::de::Error;
        let st = RngState::deserialize(d)?;
        let bytes = hex::decode(&st.seed).map_err(D::Error::custom)?;
        let seed: [u8; 32] = bytes.try_into().map_err(|_| D::Error::custom("seed must be 32 bytes"))?;
        let word_pos: u128 = st.word_pos.parse().map_err(D::Error::custom)?;
        let mut rng = ChaCha8Rng::from_seed(seed);
        rng.set_stream(st.stream);
        rng.set_word_pos(word_pos);
        Ok(rng)
    }
}

/// Species observed everywhere or nowhere.
pub fn degenerate_species(data: &PresenceData) -> Vec<usize> {
    data.prevalences()
        .iter()
        .enumerate()
        .filter(|(_, &p)| p == 0.0 || p == 1.0)
        .map(|(j, _)| j)
        .collect()
}

/// Starting state: probit intercepts from clamped prevalences, small random
/// loadings, zero factors and latent values drawn from their truncation regions.
pub fn init_chain(data: &PresenceData, config: &ChainConfig) -> Result<ChainState> {
    config.validate()?;
    let (n, s, p, r) = (data.n_sites(), data.n_species(), data.n_covariates(), config.r);
    if r > s {
        return Err(invalid(format!("factor count {r} exceeds species count {s}")));
    }
    let (candidates, phi_index) = config.phi_candidates(data.coords())?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);

    let floor = 1.0 / (2.0 * n as f64);
    let mut b = DMatrix::zeros(s, p);
    for (j, prev) in data.prevalences().into_iter().enumerate() {
        if prev == 0.0 || prev == 1.0 {
            log::warn!(
                "species {} has prevalence {prev}; clamping its initial prevalence to {}",
                data.species_names()[j],
                if prev == 0.0 { floor } else { 1.0 - floor }
            );
        }
        b[(j, 0)] = quantile_unchecked(prev.clamp(floor, 1.0 - floor));
    }
    let mut lambda = DMatrix::zeros(s, r);
    for j in 0..s {
        for h in 0..r.min(j + 1) {
            let v: f64 = StandardNormal.sample(&mut rng);
            lambda[(j, h)] = if h == j { 0.1 * v.abs().max(0.01) } else { 0.1 * v };
        }
    }
    let params = ModelParams {
        b,
        lambda,
        w: DMatrix::zeros(n, r),
        sigma2_eps: 1.0,
        phi: candidates[phi_index],
    };
    params.validate()?;
    let mut state = ChainState { z: DMatrix::zeros(n, s), params, iteration: 0, phi_index, rng };
    update_z(&mut state, data);
    Ok(state)
}

/// Redraws every `Z_ij` from `N(eta_ij, sigma2_eps)` truncated to
/// `[0, inf)` when `Y_ij = 1` and `(-inf, 0)` otherwise.
pub fn update_z(state: &mut ChainState, data: &PresenceData) {
    let ChainState { z, params, rng, .. } = state;
    let sd = params.sigma2_eps.sqrt();
    let eta = data.x() * params.b.transpose() + &params.w * params.lambda.transpose();
    for ((zv, &m), &y) in z.iter_mut().zip(eta.iter()).zip(data.y().iter()) {
        *zv = if y == 1 {
            sample_truncated_unchecked(m, sd, 0.0, f64::INFINITY, rng)
        } else {
            sample_truncated_unchecked(m, sd, f64::NEG_INFINITY, 0.0, rng)
        };
    }
}

fn standard_normal_vec<R: Rng + ?Sized>(len: usize, rng: &mut R) -> DVector<f64> {
    DVector::from_fn(len, |_, _| StandardNormal.sample(rng))
}

/// Gaussian full conditional `(mean, covariance)` of row `j` of `B`.
pub fn b_full_conditional(
    state: &ChainState,
    data: &PresenceData,
    prior_var_b: f64,
    j: usize,
) -> Result<(DVector<f64>, DMatrix<f64>)> {
    let (prec, rhs) = b_system(state, data, prior_var_b, j)?;
    let chol = prec.cholesky().ok_or(Error::NotPositiveDefinite { what: "B precision", jitter: 0.0 })?;
    Ok((chol.solve(&rhs), chol.inverse()))
}

fn b_precision(data: &PresenceData, sigma2: f64, prior_var_b: f64) -> Result<DMatrix<f64>> {
    let x = data.x();
    let xtx = x.tr_mul(x);
    let eig = xtx.clone().symmetric_eigen();
    let (lo, hi) = (eig.eigenvalues.min(), eig.eigenvalues.max());
    let cond = if lo > 0.0 { hi / lo } else { f64::INFINITY };
    if cond > MAX_DESIGN_CONDITION {
        return Err(Error::SingularDesign { condition_number: cond });
    }
    let p = x.ncols();
    Ok(xtx / sigma2 + DMatrix::identity(p, p) / prior_var_b)
}

fn b_system(
    state: &ChainState,
    data: &PresenceData,
    prior_var_b: f64,
    j: usize,
) -> Result<(DMatrix<f64>, DVector<f64>)> {
    let params = &state.params;
    let sigma2 = params.sigma2_eps;
    let prec = b_precision(data, sigma2, prior_var_b)?;
    let mut res: DVector<f64> = state.z.column(j).into_owned();
    if params.r() > 0 {
        res -= &params.w * params.lambda.row(j).transpose();
    }
    Ok((prec, data.x().tr_mul(&res) / sigma2))
}

/// Draws every row of `B` from its Gaussian full conditional under the
/// independent `N(0, prior_var_b)` prior.
pub fn update_b(state: &mut ChainState, data: &PresenceData, prior_var_b: f64) -> Result<()> {
    let params = &state.params;
    let sigma2 = params.sigma2_eps;
    let prec = b_precision(data, sigma2, prior_var_b)?;
    let chol = prec.cholesky().ok_or(Error::NotPositiveDefinite { what: "B precision", jitter: 0.0 })?;
    let l_t = chol.l().transpose();
    let mut res = state.z.clone();
    if params.r() > 0 {
        res -= &params.w * params.lambda.transpose();
    }
    let rhs_all = data.x().tr_mul(&res) / sigma2;
    let p = data.n_covariates();
    for j in 0..params.n_species() {
        let mean = chol.solve(&rhs_all.column(j).into_owned());
        let xi = standard_normal_vec(p, &mut state.rng);
        let noise = l_t.solve_upper_triangular(&xi).expect("triangular factor is invertible");
        state.params.b.set_row(j, &(mean + noise).transpose());
    }
    Ok(())
}

/// Number of free loadings in row `j` (the rest are fixed at 0).
fn free_loadings(j: usize, r: usize) -> usize {
    r.min(j + 1)
}

/// Gaussian full conditional of the free loadings of row `j`, ignoring the
/// sign restriction on the diagonal.
pub fn lambda_full_conditional(
    state: &ChainState,
    data: &PresenceData,
    prior_var_lambda: f64,
    j: usize,
) -> (DVector<f64>, DMatrix<f64>) {
    let params = &state.params;
    let q = free_loadings(j, params.r());
    let sigma2 = params.sigma2_eps;
    let wq = params.w.columns(0, q);
    let xb = data.x() * params.b.row(j).transpose();
    let res = state.z.column(j) - xb;
    let prec = wq.tr_mul(&wq) / sigma2 + DMatrix::identity(q, q) / prior_var_lambda;
    let cov = prec.cholesky().expect("loading precision is positive definite").inverse();
    let mean = &cov * (wq.tr_mul(&res) / sigma2);
    (mean, cov)
}

/// Draws the free loadings of every row from their Gaussian full
/// conditional. A negative diagonal is then folded back by flipping the sign
/// of that loading column together with the matching factor column, which
/// leaves `W Lambda'` and the prior unchanged. The chain thereby targets the
/// positive-diagonal posterior while still moving between the sign
/// orientations that a truncated draw at the diagonal cannot cross.
pub fn update_lambda(state: &mut ChainState, data: &PresenceData, prior_var_lambda: f64) {
    let r = state.params.r();
    for j in 0..state.params.n_species() {
        let (mean, cov) = lambda_full_conditional(state, data, prior_var_lambda, j);
        let row = gaussian_draw(&mean, &cov, &mut state.rng);
        for (h, v) in row.iter().enumerate() {
            state.params.lambda[(j, h)] = *v;
        }
        if j < r && state.params.lambda[(j, j)] < 0.0 {
            let s = state.params.n_species();
            state.params.lambda.view_mut((j, j), (s - j, 1)).neg_mut();
            state.params.w.column_mut(j).neg_mut();
        }
    }
}

fn gaussian_draw<R: Rng + ?Sized>(mean: &DVector<f64>, cov: &DMatrix<f64>, rng: &mut R) -> DVector<f64> {
    let n = mean.len();
    let mut c = cov.clone();
    c = (&c + c.transpose()) * 0.5;
    let l = crate::model::cholesky_jittered(&c, "conditional")
        .expect("conditional covariance of a Gaussian is positive semidefinite")
        .l();
    mean + l * standard_normal_vec(n, rng)
}

/// Residual `Z - X B' - sum over other factors`, i.e. what factor `h` must explain.
fn factor_residual(state: &ChainState, data: &PresenceData, skip: Option<usize>) -> DMatrix<f64> {
    let params = &state.params;
    let mut res = &state.z - data.x() * params.b.transpose();
    for h in 0..params.r() {
        if Some(h) != skip {
            res -= params.w.column(h) * params.lambda.column(h).transpose();
        }
    }
    res
}

/// Spatial full conditional `(mean, covariance)` of factor column `h`:
/// precision `K^{-1} + a I` with `a = |lambda_h|^2 / sigma2`.
pub fn w_factor_full_conditional(
    state: &ChainState,
    data: &PresenceData,
    gp: &GpEigen,
    h: usize,
) -> (DVector<f64>, DMatrix<f64>) {
    let (scale, rhs) = factor_system(state, data, gp, h);
    let u = &gp.vectors;
    let cov = u * DMatrix::from_diagonal(&scale) * u.transpose();
    let mean = &cov * rhs;
    (mean, cov)
}

fn factor_system(
    state: &ChainState,
    data: &PresenceData,
    gp: &GpEigen,
    h: usize,
) -> (DVector<f64>, DVector<f64>) {
    let params = &state.params;
    let sigma2 = params.sigma2_eps;
    let res = factor_residual(state, data, Some(h));
    let lam = params.lambda.column(h);
    let a = lam.norm_squared() / sigma2;
    let rhs = res * lam / sigma2;
    let scale = gp.values.map(|d| d / (1.0 + a * d));
    (scale, rhs)
}

/// Non-spatial full conditional of the factor vector at site `i`.
pub fn w_site_full_conditional(
    state: &ChainState,
    data: &PresenceData,
    i: usize,
) -> (DVector<f64>, DMatrix<f64>) {
    let params = &state.params;
    let sigma2 = params.sigma2_eps;
    let r = params.r();
    let prec = params.lambda.tr_mul(&params.lambda) / sigma2 + DMatrix::identity(r, r);
    let cov = prec.cholesky().expect("factor precision is positive definite").inverse();
    let res = state.z.row(i).transpose() - &params.b * data.x().row(i).transpose();
    let mean = &cov * (params.lambda.tr_mul(&res) / sigma2);
    (mean, cov)
}

/// Draws the factor field: each column jointly across sites under its GP
/// prior (`gp` given), or each site independently under `N(0, I_r)`.
pub fn update_w(state: &mut ChainState, data: &PresenceData, gp: Option<&GpEigen>) {
    let n = data.n_sites();
    let r = state.params.r();
    match gp {
        Some(gp) => {
            let u = &gp.vectors;
            for h in 0..r {
                let (scale, rhs) = factor_system(state, data, gp, h);
                let t = u.tr_mul(&rhs).component_mul(&scale);
                let xi = standard_normal_vec(n, &mut state.rng);
                let t = t + xi.component_mul(&scale.map(f64::sqrt));
                let col = u * t;
                state.params.w.set_column(h, &col);
            }
        }
        None => {
            let sigma2 = state.params.sigma2_eps;
            let lambda = state.params.lambda.clone();
            let prec = lambda.tr_mul(&lambda) / sigma2 + DMatrix::identity(r, r);
            let chol = prec.cholesky().expect("factor precision is positive definite");
            let l_t = chol.l().transpose();
            let res = &state.z - data.x() * state.params.b.transpose();
            let rhs = res * &lambda / sigma2;
            for i in 0..n {
                let mean = chol.solve(&rhs.row(i).transpose());
                let xi = standard_normal_vec(r, &mut state.rng);
                let noise = l_t.solve_upper_triangular(&xi).expect("triangular factor is invertible");
                state.params.w.set_row(i, &(mean + noise).transpose());
            }
        }
    }
}

/// Log full conditional of each decay candidate given `W`, up to a constant.
pub fn phi_log_weights(w: &DMatrix<f64>, gps: &[GpEigen]) -> Vec<f64> {
    gps.iter()
        .map(|gp| {
            let ld = gp.ln_det();
            w.column_iter()
                .map(|c| -0.5 * ld - 0.5 * gp.quad_form(&c.into_owned()))
                .sum()
        })
        .collect()
}

/// Draws `phi` from its discrete full conditional over the candidates.
pub fn update_phi(state: &mut ChainState, gps: &[GpEigen]) {
    if gps.len() < 2 {
        return;
    }
    let lw = phi_log_weights(&state.params.w, gps);
    let top = lw.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let weights: Vec<f64> = lw.iter().map(|v| (v - top).exp()).collect();
    let total: f64 = weights.iter().sum();
    let u: f64 = state.rng.random::<f64>() * total;
    let mut acc = 0.0;
    let mut pick = weights.len() - 1;
    for (k, w) in weights.iter().enumerate() {
        acc += w;
        if u < acc {
            pick = k;
            break;
        }
    }
    state.phi_index = pick;
    state.params.phi = gps[pick].phi;
}

/// Observed-data log posterior, `ln p(Y | B, Lambda, W)` plus the log priors
/// of `B`, the free loadings and `W`, up to additive constants.
pub fn log_posterior(
    state: &ChainState,
    data: &PresenceData,
    config: &ChainConfig,
    gp: Option<&GpEigen>,
) -> f64 {
    let params = &state.params;
    let sd = params.sigma2_eps.sqrt();
    let eta = data.x() * params.b.transpose() + &params.w * params.lambda.transpose();
    let mut lp = 0.0;
    for (&m, &y) in eta.iter().zip(data.y().iter()) {
        lp += ln_std_normal_cdf(if y == 1 { m / sd } else { -m / sd });
    }
    lp -= 0.5 * params.b.norm_squared() / config.prior_var_b;
    lp -= 0.5 * params.lambda.norm_squared() / config.prior_var_lambda;
    lp += match gp {
        Some(gp) => params
            .w
            .column_iter()
            .map(|c| -0.5 * gp.ln_det() - 0.5 * gp.quad_form(&c.into_owned()))
            .sum::<f64>(),
        None => -0.5 * params.w.norm_squared(),
    };
    lp
}

/// One stored posterior snapshot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Draw {
    pub iteration: usize,
    pub params: ModelParams,
    /// Latent correlation matrix of `Lambda Lambda' + sigma2_eps I`.
    pub h: DMatrix<f64>,
}

impl Draw {
    fn from_state(state: &ChainState) -> Self {
        let cov = assemble_sigma_star(&state.params.lambda, state.params.sigma2_eps)
            .expect("sigma2_eps is positive");
        Self { iteration: state.iteration, params: state.params.clone(), h: cov.h }
    }
}

/// Stored output of a chain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PosteriorDraws {
    pub config: ChainConfig,
    pub config_hash: String,
    pub data_hash: String,
    pub species_names: Vec<String>,
    pub site_ids: Vec<String>,
    pub coords: Vec<[f64; 2]>,
    /// Covariates at the data sites, intercept first.
    pub x: DMatrix<f64>,
    pub draws: Vec<Draw>,
    /// Log posterior after every sweep, burn-in included.
    pub log_posterior: Vec<f64>,
    pub degenerate_species: Vec<usize>,
}

impl PosteriorDraws {
    pub fn n_species(&self) -> usize {
        self.species_names.len()
    }

    pub fn n_sites(&self) -> usize {
        self.site_ids.len()
    }

    pub fn len(&self) -> usize {
        self.draws.len()
    }

    pub fn is_empty(&self) -> bool {
        self.draws.is_empty()
    }

    pub fn species_index(&self, name: &str) -> Option<usize> {
        self.species_names.iter().position(|s| s == name)
    }

    /// Covariate vector of data site `i`.
    pub fn site_covariates(&self, i: usize) -> Vec<f64> {
        self.x.row(i).iter().copied().collect()
    }
}

/// Where and how often a running chain saves itself.
#[derive(Debug, Clone)]
pub struct CheckpointPolicy {
    pub path: PathBuf,
    /// Save after every `every` sweeps; 0 saves only on failure.
    pub every: usize,
}

/// Serialized chain in mid-run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub config: ChainConfig,
    pub config_hash: String,
    pub data_hash: String,
    pub state: ChainState,
    pub draws: Vec<Draw>,
    pub log_posterior: Vec<f64>,
}

impl Checkpoint {
    pub fn save(&self, path: &Path) -> Result<()> {
        let tmp = path.with_extension("tmp");
        {
            let mut f = fs::File::create(&tmp)?;
            serde_json::to_writer(&mut f, self)?;
            f.flush()?;
        }
        fs::rename(&tmp, path)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let f = fs::File::open(path)?;
        let cp: Self = serde_json::from_reader(std::io::BufReader::new(f))?;
        if cp.config.hash() != cp.config_hash {
            return Err(invalid("checkpoint config hash does not match its config"));
        }
        Ok(cp)
    }
}

/// A chain bound to its data, with the decay eigendecompositions cached.
pub struct Sampler<'a> {
    data: &'a PresenceData,
    config: ChainConfig,
    gps: Vec<GpEigen>,
    state: ChainState,
    draws: Vec<Draw>,
    trace: Vec<f64>,
}

impl<'a> Sampler<'a> {
    pub fn new(data: &'a PresenceData, config: ChainConfig) -> Result<Self> {
        let state = init_chain(data, &config)?;
        b_precision(data, 1.0, config.prior_var_b)?;
        let gps = Self::build_gps(data, &config)?;
        Ok(Self { data, config, gps, state, draws: Vec::new(), trace: Vec::new() })
    }

    /// Continues a chain from a checkpoint taken on the same data and config.
    pub fn resume(data: &'a PresenceData, checkpoint: Checkpoint) -> Result<Self> {
        if checkpoint.data_hash != data_hash(data) {
            return Err(invalid("checkpoint was taken on different data"));
        }
        checkpoint.config.validate()?;
        check_loading_constraint(&checkpoint.state.params.lambda)?;
        let gps = Self::build_gps(data, &checkpoint.config)?;
        Ok(Self {
            data,
            config: checkpoint.config,
            gps,
            state: checkpoint.state,
            draws: checkpoint.draws,
            trace: checkpoint.log_posterior,
        })
    }

    fn build_gps(data: &PresenceData, config: &ChainConfig) -> Result<Vec<GpEigen>> {
        if !config.spatial {
            return Ok(Vec::new());
        }
        let (candidates, _) = config.phi_candidates(data.coords())?;
        candidates.iter().map(|&phi| GpEigen::new(data.coords(), phi)).collect()
    }

    pub fn state(&self) -> &ChainState {
        &self.state
    }

    pub fn config(&self) -> &ChainConfig {
        &self.config
    }

    pub fn is_finished(&self) -> bool {
        self.state.iteration >= self.config.iterations
    }

    fn gp(&self) -> Option<&GpEigen> {
        self.gps.get(self.state.phi_index)
    }

    /// One full sweep; stores a draw when past burn-in and on the thinning grid.
    pub fn sweep(&mut self) -> Result<()> {
        let data = self.data;
        update_z(&mut self.state, data);
        update_b(&mut self.state, data, self.config.prior_var_b)?;
        update_lambda(&mut self.state, data, self.config.prior_var_lambda);
        let gp = self.gps.get(self.state.phi_index);
        update_w(&mut self.state, data, gp);
        if self.config.spatial {
            update_phi(&mut self.state, &self.gps);
        }
        self.state.iteration += 1;
        let lp = log_posterior(&self.state, data, &self.config, self.gp());
        if !lp.is_finite() {
            return Err(domain(format!("log posterior became {lp} at iteration {}", self.state.iteration)));
        }
        self.trace.push(lp);
        let t = self.state.iteration;
        if t > self.config.burn_in && (t - self.config.burn_in).is_multiple_of(self.config.thin) {
            self.draws.push(Draw::from_state(&self.state));
        }
        Ok(())
    }

    pub fn checkpoint(&self) -> Checkpoint {
        Checkpoint {
            config: self.config.clone(),
            config_hash: self.config.hash(),
            data_hash: data_hash(self.data),
            state: self.state.clone(),
            draws: self.draws.clone(),
            log_posterior: self.trace.clone(),
        }
    }

    /// Runs the remaining sweeps. With a policy, the chain is saved
    /// periodically and whenever a sweep fails.
    pub fn finish(mut self, policy: Option<&CheckpointPolicy>) -> Result<PosteriorDraws> {
        let total = self.config.iterations;
        let report = (total / 10).max(1);
        while !self.is_finished() {
            if let Err(e) = self.sweep() {
                if let Some(p) = policy {
                    self.checkpoint().save(&p.path)?;
                    log::error!("sweep failed; checkpoint written to {}", p.path.display());
                }
                return Err(e);
            }
            let t = self.state.iteration;
            if let Some(p) = policy {
                if p.every > 0 && t.is_multiple_of(p.every) && t < total {
                    self.checkpoint().save(&p.path)?;
                }
            }
            if t.is_multiple_of(report) {
                log::info!("iteration {t}/{total}");
            }
        }
        Ok(PosteriorDraws {
            config_hash: self.config.hash(),
            data_hash: data_hash(self.data),
            config: self.config,
            species_names: self.data.species_names().to_vec(),
            site_ids: self.data.site_ids().to_vec(),
            coords: self.data.coords().to_vec(),
            x: self.data.x().clone(),
            draws: self.draws,
            log_posterior: self.trace,
            degenerate_species: degenerate_species(self.data),
        })
    }
}

/// Runs a full chain.
pub fn run(data: &PresenceData, config: &ChainConfig) -> Result<PosteriorDraws> {
    Sampler::new(data, config.clone())?.finish(None)
}

pub mod export;
