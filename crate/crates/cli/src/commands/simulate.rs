//! Synthetic community with a ground-truth sidecar.

use std::time::Instant;

use anyhow::{bail, Result};
use jsdm_odds::model::{assemble_sigma_star, default_phi, ModelParams};
use jsdm_odds::simulate::{constrained_loadings, gaussian_design, simulate_community, uniform_sites, GroundTruth};
use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::{finish, write_json};
use crate::config::RunConfig;
use crate::ingest::{write_sites, write_species};
use crate::manifest::OutputLock;

pub const SITES_FILE: &str = "sites.csv";
pub const SPECIES_FILE: &str = "species.csv";
pub const TRUTH_FILE: &str = "truth.json";

pub fn run(cfg: &RunConfig) -> Result<()> {
    let start = Instant::now();
    let out = cfg.out_dir()?;
    let _lock = OutputLock::acquire(out)?;
    let sc = &cfg.simulate;
    if sc.n_sites < 2 || sc.n_species < 1 || sc.r < 1 {
        bail!("simulation needs at least 2 sites, 1 species and 1 factor");
    }
    if sc.r > sc.n_species {
        bail!("factor count {} exceeds species count {}", sc.r, sc.n_species);
    }
    if !(sc.coef_sd >= 0.0 && sc.loading_sd > 0.0) {
        bail!("coef_sd must be non-negative and loading_sd positive");
    }
    let mut rng = ChaCha8Rng::seed_from_u64(sc.seed);
    let coords = uniform_sites(sc.n_sites, sc.side, &mut rng)?;
    let x = gaussian_design(sc.n_sites, sc.n_covariates + 1, &mut rng)?;
    let coef = Normal::new(0.0, sc.coef_sd)?;
    let b = DMatrix::from_fn(sc.n_species, sc.n_covariates + 1, |_, _| coef.sample(&mut rng));
    let lambda = constrained_loadings(sc.n_species, sc.r, sc.loading_sd, &mut rng);
    let phi = match sc.phi {
        Some(p) => p,
        None => default_phi(&coords)?,
    };
    let params = ModelParams { b, lambda, w: DMatrix::zeros(sc.n_sites, sc.r), sigma2_eps: 1.0, phi };
    let sim = simulate_community(&params, &coords, &x, sc.spatial, &mut rng)?;

    let names: Vec<String> = (1..=sc.n_covariates).map(|c| format!("cov{c}")).collect();
    let raw = x.columns(1, sc.n_covariates).into_owned();
    let data = &sim.data;
    write_sites(&out.join(SITES_FILE), data.site_ids(), data.coords(), &names, &raw)?;
    write_species(&out.join(SPECIES_FILE), data.site_ids(), data.species_names(), data.y())?;
    let h = assemble_sigma_star(&sim.truth.lambda, sim.truth.sigma2_eps)?.h;
    let truth = GroundTruth { params: sim.truth, spatial: sc.spatial, h, species_names: data.species_names().to_vec() };
    write_json(&out.join(TRUTH_FILE), &truth)?;
    log::info!(
        "simulated {} sites x {} species, {} presences",
        data.n_sites(),
        data.n_species(),
        data.total_presences()
    );
    finish("simulate", cfg, out, None, sc.seed, start)
}
