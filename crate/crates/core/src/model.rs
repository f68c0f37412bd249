//! Parameter containers and deterministic algebra of the latent factor model
//!
//! `Z_i = B x_i + Lambda w_i + eps_i` with `eps_i ~ N(0, sigma2_eps I)` and
//! `Y_ij = 1` exactly when `Z_ij >= 0`. The factor columns of `W` are either
//! i.i.d. standard normal across sites or independent exponential-covariance
//! Gaussian processes sharing one decay `phi`.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{check_dims, domain, invalid, Error, Result};
use crate::prob_core::BvnParams;

/// Correlation at which the effective range is measured by [`default_phi`].
pub const EFFECTIVE_RANGE_CORRELATION: f64 = 0.05;

/// Observed presence/absence data with site coordinates and covariates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PresenceData {
    y: DMatrix<u8>,
    x: DMatrix<f64>,
    coords: Vec<[f64; 2]>,
    species_names: Vec<String>,
    site_ids: Vec<String>,
}

impl PresenceData {
    /// Validates and wraps the inputs. `y` is sites x species, `x` is
    /// sites x covariates with a leading intercept column of ones.
    pub fn new(
        y: DMatrix<u8>,
        x: DMatrix<f64>,
        coords: Vec<[f64; 2]>,
        species_names: Vec<String>,
        site_ids: Vec<String>,
    ) -> Result<Self> {
        let n = y.nrows();
        let s = y.ncols();
        if n == 0 || s == 0 {
            return Err(invalid("presence data needs at least one site and one species"));
        }
        check_dims("covariates", (n, x.ncols()), x.shape())?;
        if x.ncols() == 0 {
            return Err(invalid("covariate matrix needs an intercept column"));
        }
        if coords.len() != n || site_ids.len() != n {
            return Err(Error::Dimension {
                context: "site labels",
                expected: format!("{n} coordinates and ids"),
                found: format!("{} coordinates, {} ids", coords.len(), site_ids.len()),
            });
        }
        if species_names.len() != s {
            return Err(Error::Dimension {
                context: "species names",
                expected: s.to_string(),
                found: species_names.len().to_string(),
            });
        }
        if let Some(((i, j), v)) = y
            .iter()
            .enumerate()
            .map(|(k, v)| ((k % n, k / n), v))
            .find(|(_, &v)| v > 1)
        {
            return Err(domain(format!("presence value {v} at site {i}, species {j} is not 0/1")));
        }
        for (k, v) in x.iter().enumerate() {
            if !v.is_finite() {
                return Err(domain(format!(
                    "covariate at site {}, column {} is not finite",
                    k % n,
                    k / n
                )));
            }
        }
        if let Some(i) = x.column(0).iter().position(|&v| v != 1.0) {
            return Err(invalid(format!("covariate column 0 must be the intercept (site {i} is not 1)")));
        }
        for (i, c) in coords.iter().enumerate() {
            if !c[0].is_finite() || !c[1].is_finite() {
                return Err(domain(format!("coordinates of site {i} are not finite")));
            }
        }
        if let Some((a, b)) = first_duplicate(&coords) {
            return Err(domain(format!("sites {a} and {b} share coordinates {:?}", coords[a])));
        }
        Ok(Self { y, x, coords, species_names, site_ids })
    }

    pub fn n_sites(&self) -> usize {
        self.y.nrows()
    }

    pub fn n_species(&self) -> usize {
        self.y.ncols()
    }

    pub fn n_covariates(&self) -> usize {
        self.x.ncols()
    }

    pub fn y(&self) -> &DMatrix<u8> {
        &self.y
    }

    pub fn x(&self) -> &DMatrix<f64> {
        &self.x
    }

    pub fn coords(&self) -> &[[f64; 2]] {
        &self.coords
    }

    pub fn species_names(&self) -> &[String] {
        &self.species_names
    }

    pub fn site_ids(&self) -> &[String] {
        &self.site_ids
    }

    pub fn total_presences(&self) -> usize {
        self.y.iter().map(|&v| v as usize).sum()
    }

    /// Fraction of ones in `Y`.
    pub fn presence_rate(&self) -> f64 {
        self.total_presences() as f64 / self.y.len() as f64
    }

    /// Empirical prevalence of each species.
    pub fn prevalences(&self) -> Vec<f64> {
        let n = self.n_sites() as f64;
        self.y
            .column_iter()
            .map(|c| c.iter().map(|&v| v as f64).sum::<f64>() / n)
            .collect()
    }

    /// Index of a species by name.
    pub fn species_index(&self, name: &str) -> Option<usize> {
        self.species_names.iter().position(|s| s == name)
    }

    /// Same data with site coordinates replaced.
    pub fn with_coords(&self, coords: Vec<[f64; 2]>) -> Result<Self> {
        Self::new(
            self.y.clone(),
            self.x.clone(),
            coords,
            self.species_names.clone(),
            self.site_ids.clone(),
        )
    }
}

fn first_duplicate(coords: &[[f64; 2]]) -> Option<(usize, usize)> {
    let mut idx: Vec<usize> = (0..coords.len()).collect();
    idx.sort_by(|&a, &b| {
        coords[a][0]
            .total_cmp(&coords[b][0])
            .then(coords[a][1].total_cmp(&coords[b][1]))
    });
    idx.windows(2)
        .find(|w| coords[w[0]] == coords[w[1]])
        .map(|w| (w[0].min(w[1]), w[0].max(w[1])))
}

/// One state of the model parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    /// S x p regression coefficients.
    pub b: DMatrix<f64>,
    /// S x r loadings; top r x r block lower triangular with positive diagonal.
    pub lambda: DMatrix<f64>,
    /// n x r factor values at the data sites.
    pub w: DMatrix<f64>,
    pub sigma2_eps: f64,
    pub phi: f64,
}

impl ModelParams {
    pub fn n_species(&self) -> usize {
        self.b.nrows()
    }

    pub fn n_covariates(&self) -> usize {
        self.b.ncols()
    }

    pub fn r(&self) -> usize {
        self.lambda.ncols()
    }

    /// Number of stored covariance parameters, `S r + 1` (the loadings and
    /// the idiosyncratic variance).
    pub fn covariance_parameter_count(&self) -> usize {
        self.lambda.len() + 1
    }

    /// Checks shapes, positivity and the loading constraint.
    pub fn validate(&self) -> Result<()> {
        let s = self.n_species();
        let r = self.r();
        check_dims("loadings", (s, r), self.lambda.shape())?;
        if self.w.ncols() != r {
            check_dims("factor field", (self.w.nrows(), r), self.w.shape())?;
        }
        if r > s {
            return Err(invalid(format!("factor count {r} exceeds species count {s}")));
        }
        if !(self.sigma2_eps > 0.0) || !self.sigma2_eps.is_finite() {
            return Err(domain(format!("sigma2_eps must be positive, got {}", self.sigma2_eps)));
        }
        if !(self.phi > 0.0) || !self.phi.is_finite() {
            return Err(domain(format!("phi must be positive, got {}", self.phi)));
        }
        if self.b.iter().chain(self.lambda.iter()).chain(self.w.iter()).any(|v| !v.is_finite()) {
            return Err(domain("parameters contain non-finite values"));
        }
        check_loading_constraint(&self.lambda)
    }

    /// Marginal latent standard deviation of species `j`, `sqrt(Sigma*_jj)`.
    pub fn marginal_sd(&self, j: usize) -> f64 {
        (self.lambda.row(j).norm_squared() + self.sigma2_eps).sqrt()
    }

    /// Entry `(j, k)` of the latent correlation matrix `H`.
    pub fn latent_correlation(&self, j: usize, k: usize) -> f64 {
        if j == k {
            return 1.0;
        }
        let cov = self.lambda.row(j).dot(&self.lambda.row(k));
        let vj = self.lambda.row(j).norm_squared() + self.sigma2_eps;
        let vk = self.lambda.row(k).norm_squared() + self.sigma2_eps;
        (cov / (vj * vk).sqrt()).clamp(-1.0, 1.0)
    }

    /// Fixed-effect contribution `(B x)_j`.
    pub fn fixed_effect(&self, x: &[f64], j: usize) -> f64 {
        self.b.row(j).iter().zip(x).map(|(b, x)| b * x).sum()
    }

    /// Random-effect contribution `(Lambda w)_j`.
    pub fn random_effect(&self, w: &[f64], j: usize) -> f64 {
        self.lambda.row(j).iter().zip(w).map(|(l, w)| l * w).sum()
    }
}

pub(crate) fn check_loading_constraint(lambda: &DMatrix<f64>) -> Result<()> {
    let r = lambda.ncols();
    for j in 0..r.min(lambda.nrows()) {
        // zero is accepted so that the independence model stays expressible
        if !(lambda[(j, j)] >= 0.0) {
            return Err(domain(format!("loading diagonal entry ({j},{j}) must be non-negative")));
        }
        for h in (j + 1)..r {
            if lambda[(j, h)] != 0.0 {
                return Err(domain(format!("loading entry ({j},{h}) above the diagonal must be 0")));
            }
        }
    }
    Ok(())
}

/// `Sigma* = Lambda Lambda' + sigma2 I` and its correlation matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpeciesCovariance {
    pub sigma_star: DMatrix<f64>,
    pub h: DMatrix<f64>,
}

pub fn assemble_sigma_star(lambda: &DMatrix<f64>, sigma2_eps: f64) -> Result<SpeciesCovariance> {
    if !(sigma2_eps > 0.0) || !sigma2_eps.is_finite() {
        return Err(domain(format!("sigma2_eps must be positive, got {sigma2_eps}")));
    }
    let s = lambda.nrows();
    let mut sigma_star = lambda * lambda.transpose();
    for j in 0..s {
        sigma_star[(j, j)] += sigma2_eps;
    }
    let h = DMatrix::from_fn(s, s, |a, b| {
        if a == b {
            1.0
        } else {
            (sigma_star[(a, b)] / (sigma_star[(a, a)] * sigma_star[(b, b)]).sqrt()).clamp(-1.0, 1.0)
        }
    });
    Ok(SpeciesCovariance { sigma_star, h })
}

/// `X B' + W Lambda'`, the n x S matrix of latent means.
pub fn linear_predictor(params: &ModelParams, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = x.nrows();
    check_dims("covariates", (n, params.n_covariates()), x.shape())?;
    let mut eta = x * params.b.transpose();
    if params.r() > 0 {
        check_dims("factor field", (n, params.r()), params.w.shape())?;
        eta += &params.w * params.lambda.transpose();
    }
    Ok(eta)
}

/// Which latent moments feed the orthant probabilities.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LatentMode {
    /// Given the factor values `w`: means `(Bx + Lambda w)_j / sigma_eps`,
    /// correlation 0 (the residuals are independent across species).
    Conditional,
    /// Integrating the factors out: means `(Bx)_j / sqrt(Sigma*_jj)`,
    /// correlation `H_jj'`.
    Marginal,
}

/// Standardized latent bivariate normal for species `j` and `k` at covariates `x`.
pub fn pair_latent_params(
    params: &ModelParams,
    x: &[f64],
    w: Option<&[f64]>,
    j: usize,
    k: usize,
    mode: LatentMode,
) -> Result<BvnParams> {
    let s = params.n_species();
    if j >= s || k >= s {
        return Err(invalid(format!("species index out of range ({j}, {k}) for {s} species")));
    }
    if j == k {
        return Err(invalid(format!("a pair needs two distinct species, got ({j}, {j})")));
    }
    if x.len() != params.n_covariates() {
        return Err(Error::Dimension {
            context: "covariate vector",
            expected: params.n_covariates().to_string(),
            found: x.len().to_string(),
        });
    }
    match mode {
        LatentMode::Marginal => BvnParams::new(
            params.fixed_effect(x, j) / params.marginal_sd(j),
            params.fixed_effect(x, k) / params.marginal_sd(k),
            params.latent_correlation(j, k),
        ),
        LatentMode::Conditional => {
            let w = w.ok_or_else(|| invalid("conditional mode needs factor values"))?;
            if w.len() != params.r() {
                return Err(Error::Dimension {
                    context: "factor vector",
                    expected: params.r().to_string(),
                    found: w.len().to_string(),
                });
            }
            let sd = params.sigma2_eps.sqrt();
            BvnParams::new(
                (params.fixed_effect(x, j) + params.random_effect(w, j)) / sd,
                (params.fixed_effect(x, k) + params.random_effect(w, k)) / sd,
                0.0,
            )
        }
    }
}

pub fn distance(a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

/// Exponential correlation `exp(-phi d)`.
pub fn exp_covariance(dist: f64, phi: f64) -> Result<f64> {
    if !(dist >= 0.0) {
        return Err(domain(format!("distance must be nonnegative, got {dist}")));
    }
    if !(phi > 0.0) || !phi.is_finite() {
        return Err(domain(format!("phi must be positive, got {phi}")));
    }
    Ok((-phi * dist).exp())
}

/// Correlation matrix of the exponential GP over `coords`.
pub fn exp_covariance_matrix(coords: &[[f64; 2]], phi: f64) -> Result<DMatrix<f64>> {
    exp_covariance(0.0, phi)?;
    let n = coords.len();
    Ok(DMatrix::from_fn(n, n, |a, b| {
        if a == b {
            1.0
        } else {
            (-phi * distance(coords[a], coords[b])).exp()
        }
    }))
}

/// Cross-correlation between two point sets, `rows.len() x cols.len()`.
pub fn exp_cross_covariance(rows: &[[f64; 2]], cols: &[[f64; 2]], phi: f64) -> Result<DMatrix<f64>> {
    exp_covariance(0.0, phi)?;
    Ok(DMatrix::from_fn(rows.len(), cols.len(), |a, b| {
        (-phi * distance(rows[a], cols[b])).exp()
    }))
}

/// Largest distance between any two sites.
pub fn max_distance(coords: &[[f64; 2]]) -> f64 {
    let mut best = 0.0f64;
    for (i, a) in coords.iter().enumerate() {
        for b in &coords[i + 1..] {
            best = best.max(distance(*a, *b));
        }
    }
    best
}

/// Decay whose effective range (correlation 0.05) is half the maximum
/// inter-site distance.
pub fn default_phi(coords: &[[f64; 2]]) -> Result<f64> {
    let d = max_distance(coords);
    if !(d > 0.0) || !d.is_finite() {
        return Err(domain("default phi needs at least two distinct finite sites"));
    }
    Ok(-EFFECTIVE_RANGE_CORRELATION.ln() / (0.5 * d))
}

const JITTER_STEPS: [f64; 6] = [0.0, 1e-10, 1e-9, 1e-8, 1e-7, 1e-6];

/// Cholesky factor, retrying with growing diagonal jitter.
pub(crate) fn cholesky_jittered(m: &DMatrix<f64>, what: &'static str) -> Result<Cholesky<f64, Dyn>> {
    for &eps in &JITTER_STEPS {
        let mut a = m.clone();
        if eps > 0.0 {
            log::warn!("{what} covariance: retrying Cholesky with jitter {eps:e}");
            for i in 0..a.nrows() {
                a[(i, i)] += eps;
            }
        }
        if let Some(c) = Cholesky::new(a) {
            return Ok(c);
        }
    }
    Err(Error::NotPositiveDefinite { what, jitter: JITTER_STEPS[JITTER_STEPS.len() - 1] })
}

/// Eigendecomposition `K = U diag(d) U'` of a GP correlation matrix.
#[derive(Debug, Clone)]
pub struct GpEigen {
    pub phi: f64,
    pub values: DVector<f64>,
    pub vectors: DMatrix<f64>,
}

impl GpEigen {
    pub fn new(coords: &[[f64; 2]], phi: f64) -> Result<Self> {
        let k = exp_covariance_matrix(coords, phi)?;
        for &eps in &JITTER_STEPS {
            let mut a = k.clone();
            for i in 0..a.nrows() {
                a[(i, i)] += eps;
            }
            let eig = SymmetricEigen::new(a);
            if eig.eigenvalues.min() > 0.0 {
                return Ok(Self { phi, values: eig.eigenvalues, vectors: eig.eigenvectors });
            }
            log::warn!("GP correlation not positive definite at jitter {eps:e}; retrying");
        }
        Err(Error::NotPositiveDefinite { what: "GP", jitter: JITTER_STEPS[JITTER_STEPS.len() - 1] })
    }

    pub fn ln_det(&self) -> f64 {
        self.values.iter().map(|d| d.ln()).sum()
    }

    /// `w' K^{-1} w`.
    pub fn quad_form(&self, w: &DVector<f64>) -> f64 {
        let t = self.vectors.tr_mul(w);
        t.iter().zip(self.values.iter()).map(|(t, d)| t * t / d).sum()
    }
}
