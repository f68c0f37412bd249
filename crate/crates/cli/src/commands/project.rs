//! Equirectangular projection of lon/lat site coordinates to kilometres.

use std::time::Instant;

use anyhow::{bail, Result};

use super::finish;
use super::simulate::SITES_FILE;
use crate::config::{existing, RunConfig};
use crate::ingest::{read_sites, write_sites};
use crate::manifest::{OutputLock, RunManifest};

/// `(lon, lat)` in degrees to planar `(x, y)` about `(lon0, lat0)`.
pub fn equirectangular(lon: f64, lat: f64, lon0: f64, lat0: f64, radius: f64) -> [f64; 2] {
    let x = radius * (lon - lon0).to_radians() * lat0.to_radians().cos();
    let y = radius * (lat - lat0).to_radians();
    [x, y]
}

pub fn run(cfg: &RunConfig) -> Result<()> {
    let start = Instant::now();
    let out = cfg.out_dir()?;
    let input = match (&cfg.paths.sites, &cfg.paths.data) {
        (Some(_), _) => existing(&cfg.paths.sites, "sites table", "--sites")?.to_path_buf(),
        (None, Some(dir)) => dir.join(SITES_FILE),
        (None, None) => bail!("no sites table; pass --sites CSV or --data DIR"),
    };
    let table = read_sites(&input)?;
    for (i, c) in table.coords.iter().enumerate() {
        if !(-180.0..=180.0).contains(&c[0]) || !(-90.0..=90.0).contains(&c[1]) {
            bail!("{}: row {}: ({}, {}) is not a longitude/latitude", input.display(), i + 2, c[0], c[1]);
        }
    }
    let n = table.coords.len() as f64;
    let lon0 = cfg.project.lon0.unwrap_or_else(|| table.coords.iter().map(|c| c[0]).sum::<f64>() / n);
    let lat0 = cfg.project.lat0.unwrap_or_else(|| table.coords.iter().map(|c| c[1]).sum::<f64>() / n);
    log::warn!(
        "equirectangular projection about ({lon0:.4}, {lat0:.4}); distances distort away from the reference latitude"
    );
    let coords: Vec<[f64; 2]> =
        table.coords.iter().map(|c| equirectangular(c[0], c[1], lon0, lat0, cfg.project.radius_km)).collect();
    let _lock = OutputLock::acquire(out)?;
    write_sites(&out.join(SITES_FILE), &table.ids, &coords, &table.covariate_names, &table.covariates)?;
    let parent = input.parent().and_then(RunManifest::parent_hash);
    finish("project", cfg, out, parent, 0, start)
}
