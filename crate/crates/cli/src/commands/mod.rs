//! One module per subcommand. Each takes the resolved configuration, writes
//! into its output directory and finishes with a run manifest.

pub mod fit;
pub mod ordinal;
pub mod project;
pub mod report;
pub mod richness;
pub mod simulate;
pub mod surfaces;

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, Context, Result};
use jsdm_odds::format_float;
use jsdm_odds::sampler::{export::MANIFEST_FILE, PosteriorDraws};
use jsdm_odds::tables::Extended;

use crate::config::{existing, parse_pairs, RunConfig};
use crate::ingest::Standardization;
use crate::manifest::{RunManifest, Versions, LOCK_FILE, RUN_MANIFEST};

pub const DRAWS_DIR: &str = "draws";
pub const STANDARDIZATION_FILE: &str = "standardization.json";
pub const DATA_SUMMARY_FILE: &str = "data_summary.json";

/// `inf` and `-inf` for extremes, shortest round-trip text otherwise.
pub fn fmt_ext(v: Extended) -> String {
    match v {
        Extended::NegInf => "-inf".into(),
        Extended::PosInf => "inf".into(),
        Extended::Finite(x) => format_float(x),
    }
}

pub fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

pub fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

fn collect_files(root: &Path, dir: &Path, out: &mut Vec<String>) -> Result<()> {
    for entry in fs::read_dir(dir)? {
        let path = entry?.path();
        if path.is_dir() {
            collect_files(root, &path, out)?;
        } else {
            let rel = path.strip_prefix(root).expect("inside root").to_string_lossy().replace('\\', "/");
            if rel != LOCK_FILE && rel != RUN_MANIFEST {
                out.push(rel);
            }
        }
    }
    Ok(())
}

/// Files in `dir` other than the manifest and lock, sorted.
pub fn list_outputs(dir: &Path) -> Result<Vec<String>> {
    let mut out = Vec::new();
    collect_files(dir, dir, &mut out)?;
    out.sort();
    Ok(out)
}

pub fn finish(
    command: &str,
    cfg: &RunConfig,
    out: &Path,
    parent: Option<String>,
    seed: u64,
    start: Instant,
) -> Result<()> {
    RunManifest {
        command: command.to_string(),
        config_hash: cfg.hash(),
        parent_config_hash: parent,
        seed,
        versions: Versions::current(),
        outputs: list_outputs(out)?,
        wall_time_seconds: start.elapsed().as_secs_f64(),
        config: cfg.clone(),
    }
    .write(out)
}

/// Outputs of a `fit` run.
pub struct FitOutputs {
    pub dir: PathBuf,
    pub draws: PosteriorDraws,
    pub parent_hash: Option<String>,
}

impl FitOutputs {
    pub fn load(cfg: &RunConfig) -> Result<Self> {
        let dir = existing(&cfg.paths.fit, "fit output directory", "--fit DIR")?;
        let draws_dir = dir.join(DRAWS_DIR);
        if !draws_dir.join(MANIFEST_FILE).exists() {
            bail!(
                "no posterior draws in {} (expected {}); run `jsdm-odds fit --out {}` first",
                dir.display(),
                draws_dir.join(MANIFEST_FILE).display(),
                dir.display()
            );
        }
        let draws = PosteriorDraws::read_csv_dir(&draws_dir)
            .with_context(|| format!("reading posterior draws from {}", draws_dir.display()))?;
        if draws.is_empty() {
            bail!("fit output in {} holds no posterior draws", dir.display());
        }
        Ok(Self { dir: dir.to_path_buf(), draws, parent_hash: RunManifest::parent_hash(dir) })
    }

    pub fn standardization(&self) -> Result<Standardization> {
        read_json(&self.dir.join(STANDARDIZATION_FILE))
    }
}

/// A species pair by index and name.
#[derive(Debug, Clone, PartialEq)]
pub struct Pair {
    pub j: usize,
    pub k: usize,
    pub names: (String, String),
}

impl Pair {
    /// File-name stem such as `A__B`.
    pub fn stem(&self) -> String {
        let clean = |s: &str| -> String {
            s.chars().map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '.' { c } else { '_' }).collect()
        };
        format!("{}__{}", clean(&self.names.0), clean(&self.names.1))
    }
}

pub fn resolve_pairs(species: &[String], specs: &[String]) -> Result<Vec<Pair>> {
    let find = |name: &str| {
        species
            .iter()
            .position(|s| s == name)
            .with_context(|| format!("unknown species {name:?}"))
    };
    parse_pairs(specs)?
        .into_iter()
        .map(|(a, b)| Ok(Pair { j: find(&a)?, k: find(&b)?, names: (a, b) }))
        .collect()
}
