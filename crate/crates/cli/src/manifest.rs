//! Run manifests and output-directory locking.

use std::fs::{self, OpenOptions};
use std::io::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;

pub const RUN_MANIFEST: &str = "run_manifest.json";
pub const LOCK_FILE: &str = ".jsdm-odds.lock";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Versions {
    pub jsdm_odds: String,
    pub jsdm_odds_cli: String,
}

impl Versions {
    pub fn current() -> Self {
        Self { jsdm_odds: jsdm_odds::VERSION.to_string(), jsdm_odds_cli: env!("CARGO_PKG_VERSION").to_string() }
    }
}

/// Written as the last step of every command; every key is always present.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunManifest {
    pub command: String,
    pub config_hash: String,
    /// Config hash of the run whose outputs this one consumed.
    pub parent_config_hash: Option<String>,
    pub seed: u64,
    pub versions: Versions,
    /// Output files relative to the output directory, sorted.
    pub outputs: Vec<String>,
    pub wall_time_seconds: f64,
    pub config: RunConfig,
}

impl RunManifest {
    pub fn write(&self, dir: &Path) -> Result<()> {
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        let path = dir.join(RUN_MANIFEST);
        fs::write(&path, text).with_context(|| format!("writing {}", path.display()))
    }

    pub fn read(dir: &Path) -> Result<Self> {
        let path = dir.join(RUN_MANIFEST);
        let text = fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
    }

    /// Config hash of a previous run's directory, if it has a manifest.
    pub fn parent_hash(dir: &Path) -> Option<String> {
        if !dir.join(RUN_MANIFEST).exists() {
            return None;
        }
        match Self::read(dir) {
            Ok(m) => Some(m.config_hash),
            Err(e) => {
                log::warn!("ignoring unreadable manifest in {}: {e:#}", dir.display());
                None
            }
        }
    }
}

/// Exclusive use of an output directory for the lifetime of the value.
#[derive(Debug)]
pub struct OutputLock {
    path: PathBuf,
}

impl OutputLock {
    pub fn acquire(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        let path = dir.join(LOCK_FILE);
        match OpenOptions::new().write(true).create_new(true).open(&path) {
            Ok(mut f) => {
                writeln!(f, "{}", std::process::id())?;
                Ok(Self { path })
            }
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => bail!(
                "output directory {} is in use by another run (remove {} if that run is gone)",
                dir.display(),
                path.display()
            ),
            Err(e) => Err(e).with_context(|| format!("creating {}", path.display())),
        }
    }
}

impl Drop for OutputLock {
    fn drop(&mut self) {
        let _ = fs::remove_file(&self.path);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lock_is_exclusive_and_released() {
        let dir = tempfile::tempdir().unwrap();
        let a = OutputLock::acquire(dir.path()).unwrap();
        assert!(OutputLock::acquire(dir.path()).is_err());
        drop(a);
        assert!(OutputLock::acquire(dir.path()).is_ok());
    }

    #[test]
    fn manifest_keys_are_fixed() {
        let dir = tempfile::tempdir().unwrap();
        let m = RunManifest {
            command: "fit".into(),
            config_hash: "abc".into(),
            parent_config_hash: None,
            seed: 3,
            versions: Versions::current(),
            outputs: vec!["x.csv".into()],
            wall_time_seconds: 0.5,
            config: RunConfig::default(),
        };
        m.write(dir.path()).unwrap();
        assert_eq!(RunManifest::read(dir.path()).unwrap(), m);
        let v: serde_json::Value = serde_json::from_slice(&fs::read(dir.path().join(RUN_MANIFEST)).unwrap()).unwrap();
        let keys: Vec<&str> = v.as_object().unwrap().keys().map(String::as_str).collect();
        let mut want = vec![
            "command",
            "config",
            "config_hash",
            "outputs",
            "parent_config_hash",
            "seed",
            "versions",
            "wall_time_seconds",
        ];
        want.sort();
        let mut keys = keys;
        keys.sort();
        assert_eq!(keys, want);
    }
}
