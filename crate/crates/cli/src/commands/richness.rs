//! Richness moments at every data site.

use std::time::Instant;

use anyhow::{Context, Result};
use jsdm_odds::format_float;
use jsdm_odds::inference::{richness_stats, Location};

use super::{finish, FitOutputs};
use crate::config::RunConfig;
use crate::manifest::OutputLock;

pub const RICHNESS_FILE: &str = "richness.csv";

pub fn run(cfg: &RunConfig) -> Result<()> {
    let start = Instant::now();
    let out = cfg.out_dir()?;
    let fit = FitOutputs::load(cfg)?;
    let draws = &fit.draws;
    let _lock = OutputLock::acquire(out)?;
    let path = out.join(RICHNESS_FILE);
    let mut w = csv::Writer::from_path(&path).with_context(|| format!("creating {}", path.display()))?;
    w.write_record(["site_id", "x", "y", "mean", "variance", "independence_variance"])?;
    for (i, id) in draws.site_ids.iter().enumerate() {
        let r = richness_stats(draws, &Location::Site(i))?;
        w.write_record([
            id.clone(),
            format_float(draws.coords[i][0]),
            format_float(draws.coords[i][1]),
            format_float(r.mean),
            format_float(r.variance),
            format_float(r.independence_variance),
        ])?;
    }
    w.flush()?;
    finish("richness", cfg, out, fit.parent_hash.clone(), cfg.chain.seed, start)
}
