//! Per-pair summary of a fit: residual correlation and odds ratios at the data sites.

use std::fmt::Write as _;
use std::time::Instant;

use anyhow::{Context, Result};
use jsdm_odds::format_float;
use jsdm_odds::inference::{odds_surface_at, quantile_sorted, CovariateRaster, NodeSummary};
use jsdm_odds::tables::Extended;

use super::fit::input_tables;
use super::{finish, fmt_ext, read_json, resolve_pairs, FitOutputs, Pair, DATA_SUMMARY_FILE};
use crate::config::RunConfig;
use crate::ingest::{ingest, IngestReport};
use crate::manifest::OutputLock;

/// Without explicit pairs every pair is reported up to this many species.
pub const MAX_ALL_PAIRS_SPECIES: usize = 10;
pub const REPORT_FILE: &str = "report.csv";

pub const REPORT_COLUMNS: [&str; 13] = [
    "species_a",
    "species_b",
    "h_mean",
    "h_q05",
    "h_q95",
    "min_mean_log10_theta",
    "max_mean_log10_theta",
    "min_p_exceed",
    "max_p_exceed",
    "max_p11_mean",
    "min_p00_mean",
    "sites",
    "method",
];

#[derive(Debug, Clone, PartialEq)]
pub struct PairReport {
    pub pair: Pair,
    pub h_mean: f64,
    pub h_q05: f64,
    pub h_q95: f64,
    pub min_log10_theta: Extended,
    pub max_log10_theta: Extended,
    pub min_p_exceed: f64,
    pub max_p_exceed: f64,
    pub max_p11: f64,
    pub min_p00: f64,
}

fn all_pairs(names: &[String]) -> Vec<Pair> {
    let mut out = Vec::new();
    for j in 0..names.len() {
        for k in j + 1..names.len() {
            out.push(Pair { j, k, names: (names[j].clone(), names[k].clone()) });
        }
    }
    out
}

pub fn report_pairs(cfg: &RunConfig, names: &[String]) -> Result<Vec<Pair>> {
    if !cfg.report.pairs.is_empty() {
        return resolve_pairs(names, &cfg.report.pairs);
    }
    if names.len() > MAX_ALL_PAIRS_SPECIES {
        anyhow::bail!(
            "{} species give {} pairs; choose some with --pairs A:B[,C:D...]",
            names.len(),
            names.len() * (names.len() - 1) / 2
        );
    }
    Ok(all_pairs(names))
}

fn h_quantile(sorted: &[f64], q: f64) -> f64 {
    let ext: Vec<Extended> = sorted.iter().map(|&v| Extended::Finite(v)).collect();
    match quantile_sorted(&ext, q) {
        Extended::Finite(v) => v,
        _ => unreachable!("finite inputs"),
    }
}

fn ext_min(a: Extended, b: Extended) -> Extended {
    if b < a { b } else { a }
}

fn ext_max(a: Extended, b: Extended) -> Extended {
    if b > a { b } else { a }
}

pub fn summarize_pair(fit: &FitOutputs, pair: &Pair, cfg: &RunConfig) -> Result<PairReport> {
    let draws = &fit.draws;
    let mut h: Vec<f64> = draws.draws.iter().map(|d| d.h[(pair.j, pair.k)]).collect();
    h.sort_by(f64::total_cmp);
    let raster = CovariateRaster::new(draws.coords.clone(), draws.x.clone(), cfg.surfaces.raster_cutoff)?;
    let s = odds_surface_at(draws, &draws.coords, &raster, pair.j, pair.k, &cfg.surfaces.method_options())
        .with_context(|| format!("odds ratios for {}:{}", pair.names.0, pair.names.1))?;
    let active: Vec<&NodeSummary> = s.active().collect();
    let first = active.first().context("no data site has covariates")?;
    let mut r = PairReport {
        pair: pair.clone(),
        h_mean: h.iter().sum::<f64>() / h.len() as f64,
        h_q05: h_quantile(&h, 0.05),
        h_q95: h_quantile(&h, 0.95),
        min_log10_theta: first.mean_log10_theta,
        max_log10_theta: first.mean_log10_theta,
        min_p_exceed: f64::INFINITY,
        max_p_exceed: f64::NEG_INFINITY,
        max_p11: f64::NEG_INFINITY,
        min_p00: f64::INFINITY,
    };
    for n in active {
        r.min_log10_theta = ext_min(r.min_log10_theta, n.mean_log10_theta);
        r.max_log10_theta = ext_max(r.max_log10_theta, n.mean_log10_theta);
        r.min_p_exceed = r.min_p_exceed.min(n.p_exceed);
        r.max_p_exceed = r.max_p_exceed.max(n.p_exceed);
        r.max_p11 = r.max_p11.max(n.p11_mean);
        r.min_p00 = r.min_p00.min(n.p00_mean);
    }
    Ok(r)
}

fn table_text(rows: &[PairReport]) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        "{:<24} {:>7} {:>17} {:>19} {:>12} {:>7} {:>7}",
        "pair", "H", "H 90% interval", "mean log10 theta", "P(theta>1)", "p11", "p00"
    );
    for r in rows {
        let _ = writeln!(
            s,
            "{:<24} {:>7.3} {:>8.3}..{:<7.3} {:>9}..{:<8} {:>5.2}..{:<5.2} {:>7.3} {:>7.3}",
            format!("{}:{}", r.pair.names.0, r.pair.names.1),
            r.h_mean,
            r.h_q05,
            r.h_q95,
            short(r.min_log10_theta),
            short(r.max_log10_theta),
            r.min_p_exceed,
            r.max_p_exceed,
            r.max_p11,
            r.min_p00
        );
    }
    s
}

fn short(v: Extended) -> String {
    match v {
        Extended::Finite(x) => format!("{x:.3}"),
        other => fmt_ext(other),
    }
}

fn data_only(cfg: &RunConfig) -> Result<()> {
    let (sites, species, _) = input_tables(cfg)?;
    let ing = ingest(&sites, &species)?;
    println!("{}", ing.report);
    Ok(())
}

pub fn run(cfg: &RunConfig) -> Result<()> {
    if cfg.paths.fit.is_none() {
        let p = &cfg.paths;
        if p.data.is_some() || p.sites.is_some() || p.species.is_some() {
            return data_only(cfg);
        }
    }
    let start = Instant::now();
    let out = cfg.out_dir()?;
    let fit = FitOutputs::load(cfg)?;
    let pairs = report_pairs(cfg, &fit.draws.species_names)?;
    let rows = pairs.iter().map(|p| summarize_pair(&fit, p, cfg)).collect::<Result<Vec<_>>>()?;

    let _lock = OutputLock::acquire(out)?;
    let path = out.join(REPORT_FILE);
    let mut w = csv::Writer::from_path(&path).with_context(|| format!("creating {}", path.display()))?;
    w.write_record(REPORT_COLUMNS)?;
    let method = serde_json::to_value(cfg.surfaces.method)?;
    let method = method.as_str().unwrap_or_default().to_string();
    for r in &rows {
        w.write_record([
            r.pair.names.0.clone(),
            r.pair.names.1.clone(),
            format_float(r.h_mean),
            format_float(r.h_q05),
            format_float(r.h_q95),
            fmt_ext(r.min_log10_theta),
            fmt_ext(r.max_log10_theta),
            format_float(r.min_p_exceed),
            format_float(r.max_p_exceed),
            format_float(r.max_p11),
            format_float(r.min_p00),
            fit.draws.n_sites().to_string(),
            method.clone(),
        ])?;
    }
    w.flush()?;

    let summary = fit.dir.join(DATA_SUMMARY_FILE);
    if summary.exists() {
        let rep: IngestReport = read_json(&summary)?;
        println!("{rep}\n");
    }
    println!("posterior draws: {}", fit.draws.len());
    print!("{}", table_text(&rows));
    finish("report", cfg, out, fit.parent_hash.clone(), cfg.surfaces.seed, start)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_pairs_need_few_species() {
        let names: Vec<String> = (0..4).map(|i| format!("s{i}")).collect();
        let cfg = RunConfig::default();
        assert_eq!(report_pairs(&cfg, &names).unwrap().len(), 6);
        let many: Vec<String> = (0..11).map(|i| format!("s{i}")).collect();
        assert!(report_pairs(&cfg, &many).unwrap_err().to_string().contains("--pairs"));
    }

    #[test]
    fn extended_extremes() {
        assert_eq!(ext_min(Extended::Finite(1.0), Extended::NegInf), Extended::NegInf);
        assert_eq!(ext_max(Extended::Finite(1.0), Extended::PosInf), Extended::PosInf);
        assert_eq!(ext_max(Extended::Finite(1.0), Extended::Finite(-2.0)), Extended::Finite(1.0));
    }
}
