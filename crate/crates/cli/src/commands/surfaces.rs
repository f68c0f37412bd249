//! Odds-ratio and joint-occurrence surfaces for listed species pairs.

use std::path::Path;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use jsdm_odds::format_float;
use jsdm_odds::inference::{odds_surface, CovariateRaster, Grid, SurfaceGrid};
use jsdm_odds::sampler::PosteriorDraws;

use super::{finish, fmt_ext, resolve_pairs, FitOutputs};
use crate::config::{existing, RunConfig};
use crate::ingest::read_sites;
use crate::manifest::OutputLock;

pub const SURFACE_COLUMNS: [&str; 8] =
    ["x", "y", "mean_log10_theta", "q05", "q95", "p_exceed", "p11_mean", "p00_mean"];

/// Covariates for prediction: a raster file (raw values, standardized like
/// the fit) or, by default, the data sites themselves.
pub fn raster_for(cfg: &RunConfig, fit: &FitOutputs) -> Result<CovariateRaster> {
    let cutoff = cfg.surfaces.raster_cutoff;
    match &cfg.paths.raster {
        None => Ok(CovariateRaster::new(fit.draws.coords.clone(), fit.draws.x.clone(), cutoff)?),
        Some(_) => {
            let path = existing(&cfg.paths.raster, "covariate raster", "--raster")?;
            let table = read_sites(path)?;
            let st = fit.standardization()?;
            if table.covariate_names != st.names {
                bail!(
                    "{}: covariates {:?} do not match the fitted covariates {:?}",
                    path.display(),
                    table.covariate_names,
                    st.names
                );
            }
            let x = st.design(&table.covariates)?;
            Ok(CovariateRaster::new(table.coords, x, cutoff)?)
        }
    }
}

pub fn write_surface_csv(s: &SurfaceGrid, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path).with_context(|| format!("creating {}", path.display()))?;
    w.write_record(SURFACE_COLUMNS)?;
    for (node, summary) in s.nodes.iter().zip(&s.summaries) {
        let mut rec = vec![format_float(node[0]), format_float(node[1])];
        match summary {
            Some(n) => rec.extend([
                fmt_ext(n.mean_log10_theta),
                fmt_ext(n.q05),
                fmt_ext(n.q95),
                format_float(n.p_exceed),
                format_float(n.p11_mean),
                format_float(n.p00_mean),
            ]),
            None => rec.extend(std::iter::repeat_n("NA".to_string(), 6)),
        }
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

pub fn grid_for(draws: &PosteriorDraws, cfg: &RunConfig) -> Result<Grid> {
    let [nx, ny] = cfg.surfaces.grid;
    Ok(Grid::covering(&draws.coords, nx, ny)?)
}

pub fn run(cfg: &RunConfig) -> Result<()> {
    let start = Instant::now();
    let out = cfg.out_dir()?;
    let fit = FitOutputs::load(cfg)?;
    let draws = &fit.draws;
    if cfg.surfaces.pairs.is_empty() {
        bail!("no species pairs requested; pass --pairs A:B[,C:D...]");
    }
    let pairs = resolve_pairs(&draws.species_names, &cfg.surfaces.pairs)?;
    let raster = raster_for(cfg, &fit)?;
    let grid = grid_for(draws, cfg)?;
    let opts = cfg.surfaces.method_options();
    let _lock = OutputLock::acquire(out)?;
    for pair in &pairs {
        let s = odds_surface(draws, &grid, &raster, pair.j, pair.k, &opts)
            .with_context(|| format!("surface for {}:{}", pair.names.0, pair.names.1))?;
        let stem = pair.stem();
        write_surface_csv(&s, &out.join(format!("surface_{stem}.csv")))?;
        let limit = crate::render::log_theta_heatmap(&s, &out.join(format!("log10_theta_{stem}.png")))?;
        let top = crate::render::p11_heatmap(&s, &out.join(format!("p11_{stem}.png")))?;
        let masked = s.mask().iter().filter(|m| **m).count();
        log::info!(
            "{}:{}: {} nodes ({masked} masked), log10 theta scale +/-{limit:.3}, p11 scale 0..{top:.3}",
            pair.names.0,
            pair.names.1,
            s.nodes.len()
        );
    }
    finish("surfaces", cfg, out, fit.parent_hash.clone(), cfg.surfaces.seed, start)
}
