//! Posterior draws as a directory of CSV files plus a JSON manifest.
//!
//! Matrices are written one row per (draw, row index) with the columns
//! spread out, e.g. `B.csv` has `draw,species,b0,b1,...`.

use std::fs;
use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::{ChainConfig, Draw, PosteriorDraws};
use crate::error::{format_err, Result};
use crate::fmt::format_float;
use crate::model::ModelParams;

pub const MANIFEST_FILE: &str = "manifest.json";
pub const DRAWS_FORMAT: &str = "jsdm-odds-draws";
const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DrawsManifest {
    pub format: String,
    pub version: u32,
    pub config: ChainConfig,
    pub config_hash: String,
    pub data_hash: String,
    pub n_draws: usize,
    pub n_sites: usize,
    pub n_species: usize,
    pub n_covariates: usize,
    pub r: usize,
    pub sigma2_eps: f64,
    pub species_names: Vec<String>,
    pub degenerate_species: Vec<usize>,
    pub files: Vec<String>,
}

const FILES: [&str; 7] = ["sites.csv", "B.csv", "Lambda.csv", "W.csv", "H.csv", "phi.csv", "trace.csv"];

fn header(lead: &[&str], prefix: &str, k: usize) -> Vec<String> {
    lead.iter()
        .map(|s| s.to_string())
        .chain((0..k).map(|c| format!("{prefix}{c}")))
        .collect()
}

fn write_matrix_rows(
    path: &Path,
    key: &str,
    prefix: &str,
    draws: &[Draw],
    ncols: usize,
    pick: impl Fn(&Draw) -> &DMatrix<f64>,
) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(header(&["draw", key], prefix, ncols))?;
    for (d, draw) in draws.iter().enumerate() {
        let m = pick(draw);
        for i in 0..m.nrows() {
            let mut rec = vec![d.to_string(), i.to_string()];
            rec.extend(m.row(i).iter().map(|&v| format_float(v)));
            w.write_record(&rec)?;
        }
    }
    w.flush()?;
    Ok(())
}

impl PosteriorDraws {
    /// Writes the draws into `dir`, creating it if needed.
    pub fn write_csv_dir(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        let p = self.x.ncols();
        let s = self.n_species();
        let r = self.config.r;

        let mut w = csv::Writer::from_path(dir.join("sites.csv"))?;
        w.write_record(header(&["site_id", "x", "y"], "x", p))?;
        for (i, id) in self.site_ids.iter().enumerate() {
            let mut rec = vec![id.clone(), format_float(self.coords[i][0]), format_float(self.coords[i][1])];
            rec.extend(self.x.row(i).iter().map(|&v| format_float(v)));
            w.write_record(&rec)?;
        }
        w.flush()?;

        write_matrix_rows(&dir.join("B.csv"), "species", "b", &self.draws, p, |d| &d.params.b)?;
        write_matrix_rows(&dir.join("Lambda.csv"), "species", "l", &self.draws, r, |d| &d.params.lambda)?;
        write_matrix_rows(&dir.join("W.csv"), "site", "w", &self.draws, r, |d| &d.params.w)?;
        write_matrix_rows(&dir.join("H.csv"), "species", "h", &self.draws, s, |d| &d.h)?;

        let mut w = csv::Writer::from_path(dir.join("phi.csv"))?;
        w.write_record(["draw", "iteration", "phi"])?;
        for (d, draw) in self.draws.iter().enumerate() {
            w.write_record([d.to_string(), draw.iteration.to_string(), format_float(draw.params.phi)])?;
        }
        w.flush()?;

        let mut w = csv::Writer::from_path(dir.join("trace.csv"))?;
        w.write_record(["iteration", "log_posterior"])?;
        for (t, lp) in self.log_posterior.iter().enumerate() {
            w.write_record([(t + 1).to_string(), format_float(*lp)])?;
        }
        w.flush()?;

        let manifest = DrawsManifest {
            format: DRAWS_FORMAT.to_string(),
            version: VERSION,
            config: self.config.clone(),
            config_hash: self.config_hash.clone(),
            data_hash: self.data_hash.clone(),
            n_draws: self.draws.len(),
            n_sites: self.n_sites(),
            n_species: s,
            n_covariates: p,
            r,
            sigma2_eps: self.draws.first().map_or(1.0, |d| d.params.sigma2_eps),
            species_names: self.species_names.clone(),
            degenerate_species: self.degenerate_species.clone(),
            files: FILES.iter().map(|f| f.to_string()).collect(),
        };
        let mut text = serde_json::to_string_pretty(&manifest)?;
        text.push('\n');
        fs::write(dir.join(MANIFEST_FILE), text)?;
        Ok(())
    }

    /// Reads a directory written by [`PosteriorDraws::write_csv_dir`].
    pub fn read_csv_dir(dir: &Path) -> Result<Self> {
        let mpath = dir.join(MANIFEST_FILE);
        let m: DrawsManifest = serde_json::from_slice(&fs::read(&mpath)?)?;
        let mname = mpath.display().to_string();
        if m.format != DRAWS_FORMAT || m.version != VERSION {
            return Err(format_err(mname, format!("unsupported format {} v{}", m.format, m.version)));
        }
        if m.config.hash() != m.config_hash {
            return Err(format_err(mname, "config hash does not match the stored config"));
        }
        let (n, s, p, r, nd) = (m.n_sites, m.n_species, m.n_covariates, m.r, m.n_draws);

        let rows = read_rows(&dir.join("sites.csv"), 3 + p)?;
        if rows.len() != n {
            return Err(format_err("sites.csv", format!("expected {n} sites, found {}", rows.len())));
        }
        let mut site_ids = Vec::with_capacity(n);
        let mut coords = Vec::with_capacity(n);
        let mut x = DMatrix::zeros(n, p);
        for (i, row) in rows.iter().enumerate() {
            site_ids.push(row[0].clone());
            coords.push([parse(&row[1], "sites.csv", i)?, parse(&row[2], "sites.csv", i)?]);
            for c in 0..p {
                x[(i, c)] = parse(&row[3 + c], "sites.csv", i)?;
            }
        }

        let b = read_matrices(&dir.join("B.csv"), nd, s, p)?;
        let lambda = read_matrices(&dir.join("Lambda.csv"), nd, s, r)?;
        let w = read_matrices(&dir.join("W.csv"), nd, n, r)?;
        let h = read_matrices(&dir.join("H.csv"), nd, s, s)?;

        let phi_rows = read_rows(&dir.join("phi.csv"), 3)?;
        if phi_rows.len() != nd {
            return Err(format_err("phi.csv", format!("expected {nd} rows, found {}", phi_rows.len())));
        }
        let mut draws = Vec::with_capacity(nd);
        for (d, (((b, lambda), w), h)) in b.into_iter().zip(lambda).zip(w).zip(h).enumerate() {
            let row = &phi_rows[d];
            let iteration = row[1]
                .parse()
                .map_err(|_| format_err("phi.csv", format!("row {}: bad iteration {:?}", d + 2, row[1])))?;
            let phi = parse(&row[2], "phi.csv", d)?;
            let params = ModelParams { b, lambda, w, sigma2_eps: m.sigma2_eps, phi };
            params.validate()?;
            draws.push(Draw { iteration, params, h });
        }

        let trace = read_rows(&dir.join("trace.csv"), 2)?
            .iter()
            .enumerate()
            .map(|(t, row)| parse(&row[1], "trace.csv", t))
            .collect::<Result<Vec<_>>>()?;

        Ok(Self {
            config: m.config,
            config_hash: m.config_hash,
            data_hash: m.data_hash,
            species_names: m.species_names,
            site_ids,
            coords,
            x,
            draws,
            log_posterior: trace,
            degenerate_species: m.degenerate_species,
        })
    }
}

fn parse(s: &str, file: &str, row: usize) -> Result<f64> {
    s.parse()
        .map_err(|_| format_err(file, format!("row {}: {s:?} is not a number", row + 2)))
}

fn read_rows(path: &Path, width: usize) -> Result<Vec<Vec<String>>> {
    let name = path.file_name().map_or_else(String::new, |f| f.to_string_lossy().into_owned());
    let mut rdr = csv::Reader::from_path(path)?;
    let mut out = Vec::new();
    for (k, rec) in rdr.records().enumerate() {
        let rec = rec?;
        if rec.len() != width {
            return Err(format_err(&name, format!("row {}: expected {width} fields, found {}", k + 2, rec.len())));
        }
        out.push(rec.iter().map(str::to_string).collect());
    }
    Ok(out)
}

fn read_matrices(path: &Path, nd: usize, nrows: usize, ncols: usize) -> Result<Vec<DMatrix<f64>>> {
    let name = path.file_name().map_or_else(String::new, |f| f.to_string_lossy().into_owned());
    let rows = read_rows(path, 2 + ncols)?;
    if rows.len() != nd * nrows {
        return Err(format_err(&name, format!("expected {} rows, found {}", nd * nrows, rows.len())));
    }
    let mut out = Vec::with_capacity(nd);
    for d in 0..nd {
        let mut m = DMatrix::zeros(nrows, ncols);
        for i in 0..nrows {
            let k = d * nrows + i;
            let row = &rows[k];
            if row[0] != d.to_string() || row[1] != i.to_string() {
                return Err(format_err(&name, format!("row {}: expected index ({d}, {i})", k + 2)));
            }
            for c in 0..ncols {
                m[(i, c)] = parse(&row[2 + c], &name, k)?;
            }
        }
        out.push(m);
    }
    Ok(out)
}
