//! Run configuration: every command reads its parameters from one JSON
//! document, with command-line flags layered on top.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use jsdm_odds::inference::{MethodOptions, PairMethod};
use jsdm_odds::sampler::ChainConfig;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub paths: Paths,
    pub simulate: SimulateConfig,
    pub chain: ChainConfig,
    pub fit: FitConfig,
    pub surfaces: SurfaceConfig,
    pub report: ReportConfig,
    pub ordinal: OrdinalConfig,
    pub project: ProjectConfig,
}

/// Inputs and the output directory. Unused entries stay `null`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    pub out: Option<PathBuf>,
    /// Directory holding `sites.csv` and `species.csv`.
    pub data: Option<PathBuf>,
    pub sites: Option<PathBuf>,
    pub species: Option<PathBuf>,
    /// Output directory of a `fit` run.
    pub fit: Option<PathBuf>,
    /// Covariate raster CSV (`x,y,` then raw covariates).
    pub raster: Option<PathBuf>,
    /// Ordinal table CSV.
    pub table: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulateConfig {
    pub n_sites: usize,
    pub n_species: usize,
    /// Covariates besides the intercept.
    pub n_covariates: usize,
    pub r: usize,
    /// Sites are uniform on `[0, side]^2`.
    pub side: f64,
    /// Decay; `None` uses the default effective range.
    pub phi: Option<f64>,
    pub spatial: bool,
    pub coef_sd: f64,
    pub loading_sd: f64,
    pub seed: u64,
}

impl Default for SimulateConfig {
    fn default() -> Self {
        Self {
            n_sites: 200,
            n_species: 8,
            n_covariates: 2,
            r: 2,
            side: 10.0,
            phi: None,
            spatial: true,
            coef_sd: 0.5,
            loading_sd: 1.0,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FitConfig {
    /// Save a checkpoint every this many sweeps; 0 saves only on failure.
    pub checkpoint_every: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SurfaceConfig {
    /// Species pairs as `"A:B"`.
    pub pairs: Vec<String>,
    pub grid: [usize; 2],
    pub method: PairMethod,
    pub mc_samples: usize,
    pub krige_samples: usize,
    pub seed: u64,
    /// Raster lookup radius; `None` uses the largest nearest-neighbour spacing.
    pub raster_cutoff: Option<f64>,
}

impl Default for SurfaceConfig {
    fn default() -> Self {
        let m = MethodOptions::default();
        Self {
            pairs: Vec::new(),
            grid: [30, 30],
            method: m.method,
            mc_samples: m.mc_samples,
            krige_samples: m.krige_samples,
            seed: m.seed,
            raster_cutoff: None,
        }
    }
}

impl SurfaceConfig {
    pub fn method_options(&self) -> MethodOptions {
        MethodOptions {
            method: self.method,
            mc_samples: self.mc_samples,
            krige_samples: self.krige_samples,
            seed: self.seed,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReportConfig {
    /// Pairs to summarize; empty means every pair when there are at most
    /// [`crate::commands::report::MAX_ALL_PAIRS_SPECIES`] species.
    pub pairs: Vec<String>,
}

/// Latent bivariate normal cut into ordered categories.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GaussianOrdinal {
    pub mu: [f64; 2],
    pub rho: f64,
    pub cutpoints: [Vec<f64>; 2],
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OrdinalConfig {
    pub gaussian: Option<GaussianOrdinal>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProjectConfig {
    /// Reference longitude and latitude in degrees; `None` uses the data means.
    pub lon0: Option<f64>,
    pub lat0: Option<f64>,
    pub radius_km: f64,
}

impl Default for ProjectConfig {
    fn default() -> Self {
        Self { lon0: None, lat0: None, radius_km: 6371.0088 }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// SHA-256 of the compact JSON form.
    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(serde_json::to_vec(self).expect("config serializes")))
    }

    pub fn out_dir(&self) -> Result<&Path> {
        match &self.paths.out {
            Some(p) => Ok(p),
            None => bail!("no output directory; pass --out DIR"),
        }
    }
}

/// Checks that a required input exists.
pub fn existing<'a>(p: &'a Option<PathBuf>, what: &str, flag: &str) -> Result<&'a Path> {
    let Some(p) = p else { bail!("missing {what}; pass {flag}") };
    if !p.exists() {
        bail!("{what} {} does not exist", p.display());
    }
    Ok(p)
}

/// Parses `"A:B,C:D"` into name pairs.
pub fn parse_pairs(specs: &[String]) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    for spec in specs.iter().flat_map(|s| s.split(',')) {
        let spec = spec.trim();
        if spec.is_empty() {
            continue;
        }
        let Some((a, b)) = spec.split_once(':') else {
            bail!("pair {spec:?} is not of the form A:B");
        };
        let (a, b) = (a.trim(), b.trim());
        if a.is_empty() || b.is_empty() || a == b {
            bail!("pair {spec:?} needs two different species names");
        }
        out.push((a.to_string(), b.to_string()));
    }
    Ok(out)
}

/// Parses `"NX,NY"`.
pub fn parse_grid(s: &str) -> Result<[usize; 2]> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    let [nx, ny] = parts.as_slice() else { bail!("grid {s:?} is not of the form NX,NY") };
    let nx: usize = nx.parse().with_context(|| format!("grid width {nx:?}"))?;
    let ny: usize = ny.parse().with_context(|| format!("grid height {ny:?}"))?;
    if nx < 2 || ny < 2 {
        bail!("grid needs at least 2 nodes per axis, got {nx}x{ny}");
    }
    Ok([nx, ny])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pairs_and_grid() {
        let p = parse_pairs(&["A:B, C:D".into(), "E:F".into()]).unwrap();
        assert_eq!(p, vec![("A".into(), "B".into()), ("C".into(), "D".into()), ("E".into(), "F".into())]);
        assert!(parse_pairs(&["A-B".into()]).is_err());
        assert!(parse_pairs(&["A:A".into()]).is_err());
        assert_eq!(parse_grid("10, 4").unwrap(), [10, 4]);
        assert!(parse_grid("1,4").is_err());
        assert!(parse_grid("3").is_err());
    }

    #[test]
    fn config_round_trip_and_strictness() {
        let c = RunConfig::default();
        let back: RunConfig = serde_json::from_str(&c.to_json()).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.hash(), c.hash());
        let partial: RunConfig = serde_json::from_str(r#"{"chain": {"iterations": 50, "burn_in": 10}}"#).unwrap();
        assert_eq!(partial.chain.iterations, 50);
        assert_eq!(partial.chain.r, ChainConfig::default().r);
        assert!(serde_json::from_str::<RunConfig>(r#"{"chian": {}}"#).is_err());
    }
}
