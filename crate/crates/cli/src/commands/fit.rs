//! Ingest the tables and run the sampler.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, Context, Result};
use jsdm_odds::sampler::{Checkpoint, CheckpointPolicy, Sampler};

use super::simulate::{SITES_FILE, SPECIES_FILE};
use super::{finish, write_json, DATA_SUMMARY_FILE, DRAWS_DIR, STANDARDIZATION_FILE};
use crate::config::{existing, RunConfig};
use crate::ingest::ingest;
use crate::manifest::{OutputLock, RunManifest};

pub const CHECKPOINT_FILE: &str = "checkpoint.json";

/// The site and species tables named by the configuration, plus the
/// directory whose manifest (if any) produced them.
pub fn input_tables(cfg: &RunConfig) -> Result<(PathBuf, PathBuf, Option<PathBuf>)> {
    let p = &cfg.paths;
    match (&p.sites, &p.species, &p.data) {
        (Some(_), Some(_), _) => {
            let sites = existing(&p.sites, "sites table", "--sites")?.to_path_buf();
            let species = existing(&p.species, "species table", "--species")?.to_path_buf();
            let parent = sites.parent().map(Path::to_path_buf);
            Ok((sites, species, parent))
        }
        (None, None, Some(dir)) => {
            let sites = dir.join(SITES_FILE);
            let species = dir.join(SPECIES_FILE);
            for f in [&sites, &species] {
                if !f.exists() {
                    bail!("{} not found; --data must point at a directory with {SITES_FILE} and {SPECIES_FILE}", f.display());
                }
            }
            Ok((sites, species, Some(dir.clone())))
        }
        _ => bail!("give either --data DIR or both --sites and --species"),
    }
}

pub fn run(cfg: &RunConfig, resume: bool) -> Result<()> {
    let start = Instant::now();
    let out = cfg.out_dir()?;
    let (sites, species, parent_dir) = input_tables(cfg)?;
    cfg.chain.validate()?;
    let _lock = OutputLock::acquire(out)?;
    let ing = ingest(&sites, &species)?;
    println!("{}", ing.report);
    write_json(&out.join(DATA_SUMMARY_FILE), &ing.report)?;
    write_json(&out.join(STANDARDIZATION_FILE), &ing.standardization)?;

    let cp_path = out.join(CHECKPOINT_FILE);
    let sampler = if resume {
        if !cp_path.exists() {
            bail!("--resume given but {} does not exist", cp_path.display());
        }
        let cp = Checkpoint::load(&cp_path)?;
        if cp.config != cfg.chain {
            bail!("checkpoint in {} was written with a different chain configuration", cp_path.display());
        }
        log::info!("resuming from iteration {}", cp.state.iteration);
        Sampler::resume(&ing.data, cp)?
    } else {
        Sampler::new(&ing.data, cfg.chain.clone())?
    };
    let policy = CheckpointPolicy { path: cp_path.clone(), every: cfg.fit.checkpoint_every };
    let draws = sampler.finish(Some(&policy)).context("sampler failed")?;
    if cp_path.exists() {
        fs::remove_file(&cp_path)?;
    }
    for &j in &draws.degenerate_species {
        log::warn!("species {} is present everywhere or nowhere", draws.species_names[j]);
    }
    draws.write_csv_dir(&out.join(DRAWS_DIR))?;
    let parent = parent_dir.as_deref().and_then(RunManifest::parent_hash);
    finish("fit", cfg, out, parent, cfg.chain.seed, start)
}
