//! Conditional Gaussian prediction of the factor field at new locations.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{invalid, Result};
use crate::model::{cholesky_jittered, exp_covariance_matrix, exp_cross_covariance};
use crate::sampler::{Draw, PosteriorDraws};

/// Simple-kriging weights for a fixed decay: new-location means are
/// `weights' w` and pointwise standard deviations `sd`.
#[derive(Debug, Clone)]
pub struct KrigingWeights {
    pub phi: f64,
    /// n_sites x n_new.
    pub weights: DMatrix<f64>,
    pub sd: DVector<f64>,
}

impl KrigingWeights {
    pub fn new(sites: &[[f64; 2]], new: &[[f64; 2]], phi: f64) -> Result<Self> {
        let k = exp_covariance_matrix(sites, phi)?;
        let chol = cholesky_jittered(&k, "GP")?;
        let cross = exp_cross_covariance(sites, new, phi)?;
        let weights = chol.solve(&cross);
        let sd = DVector::from_fn(new.len(), |m, _| {
            let v = 1.0 - cross.column(m).dot(&weights.column(m));
            v.max(0.0).sqrt()
        });
        Ok(Self { phi, weights, sd })
    }

    /// Kriged mean of every factor at new location `m`.
    pub fn mean_at(&self, w: &DMatrix<f64>, m: usize) -> DVector<f64> {
        w.tr_mul(&self.weights.column(m))
    }
}

/// Weights for every distinct decay among the draws, keyed by bit pattern.
#[derive(Debug, Clone)]
pub struct Kriger {
    by_phi: BTreeMap<u64, KrigingWeights>,
}

impl Kriger {
    pub fn new(draws: &PosteriorDraws, new: &[[f64; 2]]) -> Result<Self> {
        let mut by_phi = BTreeMap::new();
        for d in &draws.draws {
            check_stored_w(draws, d)?;
            let phi = d.params.phi;
            if let std::collections::btree_map::Entry::Vacant(e) = by_phi.entry(phi.to_bits()) {
                e.insert(KrigingWeights::new(&draws.coords, new, phi)?);
            }
        }
        Ok(Self { by_phi })
    }

    pub fn weights(&self, phi: f64) -> &KrigingWeights {
        &self.by_phi[&phi.to_bits()]
    }
}

pub(crate) fn check_stored_w(draws: &PosteriorDraws, d: &Draw) -> Result<()> {
    if d.params.w.nrows() != draws.n_sites() || d.params.w.ncols() != d.params.r() {
        return Err(invalid(format!(
            "draw at iteration {} has no stored factor values for the {} data sites",
            d.iteration,
            draws.n_sites()
        )));
    }
    Ok(())
}

/// Kriged factors of one draw at the new locations.
#[derive(Debug, Clone, PartialEq)]
pub struct KrigedFactors {
    /// n_new x r conditional means.
    pub mean: DMatrix<f64>,
    /// Conditional standard deviation at each new location (shared by factors).
    pub sd: DVector<f64>,
    /// One draw per location and factor, independent across locations.
    pub sample: DMatrix<f64>,
}

/// For every posterior draw, the conditional distribution of the factors at
/// `new` given the draw's factor values at the data sites, plus one draw.
pub fn krige_factors<R: Rng + ?Sized>(
    draws: &PosteriorDraws,
    new: &[[f64; 2]],
    rng: &mut R,
) -> Result<Vec<KrigedFactors>> {
    if !draws.config.spatial {
        return Err(invalid("kriging needs draws from the spatial model"));
    }
    let kriger = Kriger::new(draws, new)?;
    let mut out = Vec::with_capacity(draws.len());
    for d in &draws.draws {
        let kw = kriger.weights(d.params.phi);
        let mean = kw.weights.tr_mul(&d.params.w);
        let mut sample = mean.clone();
        for m in 0..new.len() {
            for h in 0..mean.ncols() {
                let xi: f64 = StandardNormal.sample(rng);
                sample[(m, h)] += kw.sd[m] * xi;
            }
        }
        out.push(KrigedFactors { mean, sd: kw.sd.clone(), sample });
    }
    Ok(out)
}
