//! Reading and writing the site and species tables.
//!
//! `sites.csv`: `site_id,x,y` then one column per covariate.
//! `species.csv`: `site_id` then one 0/1 column per species.

use std::collections::HashMap;
use std::fmt;
use std::path::Path;

use anyhow::{bail, Context, Result};
use jsdm_odds::format_float;
use jsdm_odds::model::PresenceData;
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

/// Raw contents of `sites.csv`.
#[derive(Debug, Clone, PartialEq)]
pub struct SiteTable {
    pub ids: Vec<String>,
    pub coords: Vec<[f64; 2]>,
    pub covariate_names: Vec<String>,
    /// n x p, unstandardized.
    pub covariates: DMatrix<f64>,
}

/// Raw contents of `species.csv`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpeciesTable {
    pub site_ids: Vec<String>,
    pub names: Vec<String>,
    pub y: DMatrix<u8>,
}

/// Per-covariate centring and scaling applied before fitting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardization {
    pub names: Vec<String>,
    pub mean: Vec<f64>,
    pub sd: Vec<f64>,
}

impl Standardization {
    pub fn fit(names: &[String], raw: &DMatrix<f64>) -> Result<Self> {
        let n = raw.nrows();
        if n < 2 && raw.ncols() > 0 {
            bail!("standardizing covariates needs at least 2 sites");
        }
        let mut mean = Vec::with_capacity(raw.ncols());
        let mut sd = Vec::with_capacity(raw.ncols());
        for (c, col) in raw.column_iter().enumerate() {
            let m = col.sum() / n as f64;
            let v = col.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1) as f64;
            if v.is_nan() || v <= 0.0 {
                bail!("covariate {} is constant across sites and cannot be standardized", names[c]);
            }
            mean.push(m);
            sd.push(v.sqrt());
        }
        Ok(Self { names: names.to_vec(), mean, sd })
    }

    /// Design matrix: intercept column then standardized covariates.
    pub fn design(&self, raw: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        if raw.ncols() != self.mean.len() {
            bail!("expected {} covariates, found {}", self.mean.len(), raw.ncols());
        }
        Ok(DMatrix::from_fn(raw.nrows(), raw.ncols() + 1, |i, c| {
            if c == 0 {
                1.0
            } else {
                (raw[(i, c - 1)] - self.mean[c - 1]) / self.sd[c - 1]
            }
        }))
    }
}

/// The summary printed after ingestion.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IngestReport {
    pub n_sites: usize,
    pub n_species: usize,
    pub n_covariates: usize,
    pub total_presences: usize,
    pub presence_rate: f64,
}

impl IngestReport {
    pub fn of(data: &PresenceData) -> Self {
        Self {
            n_sites: data.n_sites(),
            n_species: data.n_species(),
            n_covariates: data.n_covariates() - 1,
            total_presences: data.total_presences(),
            presence_rate: data.presence_rate(),
        }
    }
}

impl fmt::Display for IngestReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "sites: {}\nspecies: {}\ncovariates: {}\nbinary responses: {}\npresences: {} ({:.2}%)",
            self.n_sites,
            self.n_species,
            self.n_covariates,
            self.n_sites * self.n_species,
            self.total_presences,
            100.0 * self.presence_rate
        )
    }
}

#[derive(Debug, Clone)]
pub struct Ingested {
    pub sites: SiteTable,
    pub species: SpeciesTable,
    pub standardization: Standardization,
    pub data: PresenceData,
    pub report: IngestReport,
}

fn parse_num(field: &str, file: &Path, row: usize, col: &str) -> Result<f64> {
    let v: f64 = field
        .trim()
        .parse()
        .map_err(|_| anyhow::anyhow!("{}: row {row}, column {col}: {field:?} is not a number", file.display()))?;
    if !v.is_finite() {
        bail!("{}: row {row}, column {col}: value {field:?} is not finite", file.display());
    }
    Ok(v)
}

fn reader(path: &Path) -> Result<csv::Reader<std::fs::File>> {
    csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .with_context(|| format!("opening {}", path.display()))
}

fn check_site_id(id: &str, path: &Path, row: usize, seen: &mut HashMap<String, usize>) -> Result<()> {
    if id.is_empty() {
        bail!("{}: row {row}: empty site_id", path.display());
    }
    if let Some(first) = seen.insert(id.to_string(), row) {
        bail!("{}: row {row}: site_id {id:?} already used on row {first}", path.display());
    }
    Ok(())
}

/// Row numbers in messages count the header as row 1.
pub fn read_sites(path: &Path) -> Result<SiteTable> {
    let mut rdr = reader(path)?;
    let header: Vec<String> = rdr.headers()?.iter().map(String::from).collect();
    if header.len() < 3 || header[0] != "site_id" || header[1] != "x" || header[2] != "y" {
        bail!("{}: header must start with site_id,x,y; found {}", path.display(), header.join(","));
    }
    let covariate_names = header[3..].to_vec();
    let p = covariate_names.len();
    let mut ids = Vec::new();
    let mut coords = Vec::new();
    let mut values = Vec::new();
    let mut seen = HashMap::new();
    let mut at: HashMap<(u64, u64), usize> = HashMap::new();
    for (i, rec) in rdr.records().enumerate() {
        let row = i + 2;
        let rec = rec.with_context(|| format!("{}: row {row}", path.display()))?;
        if rec.len() != header.len() {
            bail!("{}: row {row}: expected {} fields, found {}", path.display(), header.len(), rec.len());
        }
        check_site_id(&rec[0], path, row, &mut seen)?;
        let xy = [parse_num(&rec[1], path, row, "x")?, parse_num(&rec[2], path, row, "y")?];
        let key = ((xy[0] + 0.0).to_bits(), (xy[1] + 0.0).to_bits());
        if let Some(first) = at.insert(key, row) {
            bail!("{}: row {row}: coordinates ({}, {}) duplicate row {first}", path.display(), xy[0], xy[1]);
        }
        ids.push(rec[0].to_string());
        coords.push(xy);
        for (c, name) in covariate_names.iter().enumerate() {
            values.push(parse_num(&rec[3 + c], path, row, name)?);
        }
    }
    if ids.is_empty() {
        bail!("{}: no sites", path.display());
    }
    let covariates = DMatrix::from_row_slice(ids.len(), p, &values);
    Ok(SiteTable { ids, coords, covariate_names, covariates })
}

pub fn read_species(path: &Path) -> Result<SpeciesTable> {
    let mut rdr = reader(path)?;
    let header: Vec<String> = rdr.headers()?.iter().map(String::from).collect();
    if header.len() < 2 || header[0] != "site_id" {
        bail!("{}: header must be site_id followed by species names", path.display());
    }
    let names = header[1..].to_vec();
    let mut dup = HashMap::new();
    for (c, n) in names.iter().enumerate() {
        if let Some(prev) = dup.insert(n.as_str(), c) {
            bail!("{}: species {n:?} appears in columns {} and {}", path.display(), prev + 2, c + 2);
        }
    }
    let mut site_ids = Vec::new();
    let mut values = Vec::new();
    let mut seen = HashMap::new();
    for (i, rec) in rdr.records().enumerate() {
        let row = i + 2;
        let rec = rec.with_context(|| format!("{}: row {row}", path.display()))?;
        if rec.len() != header.len() {
            bail!("{}: row {row}: expected {} fields, found {}", path.display(), header.len(), rec.len());
        }
        check_site_id(&rec[0], path, row, &mut seen)?;
        site_ids.push(rec[0].to_string());
        for (c, name) in names.iter().enumerate() {
            let v = match &rec[c + 1] {
                "0" => 0u8,
                "1" => 1u8,
                other => bail!(
                    "{}: row {row}, column {} ({name}): {other:?} is not 0 or 1",
                    path.display(),
                    c + 2
                ),
            };
            values.push(v);
        }
    }
    let y = DMatrix::from_row_slice(site_ids.len(), names.len(), &values);
    Ok(SpeciesTable { site_ids, names, y })
}

/// Reads both tables, aligns species rows to the site order and
/// standardizes the covariates.
pub fn ingest(sites_csv: &Path, species_csv: &Path) -> Result<Ingested> {
    let sites = read_sites(sites_csv)?;
    let species = read_species(species_csv)?;
    let index: HashMap<&str, usize> = species.site_ids.iter().enumerate().map(|(i, s)| (s.as_str(), i)).collect();
    let mut order = Vec::with_capacity(sites.ids.len());
    for (i, id) in sites.ids.iter().enumerate() {
        match index.get(id.as_str()) {
            Some(&k) => order.push(k),
            None => bail!(
                "{}: site_id {id:?} (row {}) has no row in {}",
                sites_csv.display(),
                i + 2,
                species_csv.display()
            ),
        }
    }
    if species.site_ids.len() != sites.ids.len() {
        let known: std::collections::HashSet<&str> = sites.ids.iter().map(String::as_str).collect();
        let (row, id) = species
            .site_ids
            .iter()
            .enumerate()
            .find(|(_, s)| !known.contains(s.as_str()))
            .expect("an extra species row exists");
        bail!("{}: site_id {id:?} (row {}) is not in {}", species_csv.display(), row + 2, sites_csv.display());
    }
    let y = DMatrix::from_fn(sites.ids.len(), species.names.len(), |i, j| species.y[(order[i], j)]);
    let standardization = Standardization::fit(&sites.covariate_names, &sites.covariates)?;
    let x = standardization.design(&sites.covariates)?;
    let data = PresenceData::new(y, x, sites.coords.clone(), species.names.clone(), sites.ids.clone())?;
    let report = IngestReport::of(&data);
    Ok(Ingested { sites, species, standardization, data, report })
}

pub fn write_sites(path: &Path, ids: &[String], coords: &[[f64; 2]], names: &[String], cov: &DMatrix<f64>) -> Result<()> {
    let mut w = csv::Writer::from_path(path).with_context(|| format!("creating {}", path.display()))?;
    let mut head = vec!["site_id".to_string(), "x".into(), "y".into()];
    head.extend(names.iter().cloned());
    w.write_record(&head)?;
    for (i, id) in ids.iter().enumerate() {
        let mut rec = vec![id.clone(), format_float(coords[i][0]), format_float(coords[i][1])];
        rec.extend(cov.row(i).iter().map(|&v| format_float(v)));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_species(path: &Path, ids: &[String], names: &[String], y: &DMatrix<u8>) -> Result<()> {
    let mut w = csv::Writer::from_path(path).with_context(|| format!("creating {}", path.display()))?;
    let mut head = vec!["site_id".to_string()];
    head.extend(names.iter().cloned());
    w.write_record(&head)?;
    for (i, id) in ids.iter().enumerate() {
        let mut rec = vec![id.clone()];
        rec.extend(y.row(i).iter().map(|v| v.to_string()));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}
