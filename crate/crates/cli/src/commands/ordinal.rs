//! Local, global and cumulative odds ratios of an ordinal table.

use std::time::Instant;

use anyhow::{bail, Context, Result};
use jsdm_odds::ordinal::{cumulative_odds, global_odds, local_odds, ordinal_table_from_gaussian, OrdinalTable};
use jsdm_odds::tables::Extended;

use super::{finish, fmt_ext};
use crate::config::{existing, RunConfig};
use crate::manifest::OutputLock;

type OddsFn = fn(&OrdinalTable, usize, usize) -> jsdm_odds::Result<Extended>;

pub const TABLE_FILE: &str = "table.csv";
pub const ODDS_FILE: &str = "odds.csv";

pub fn table_for(cfg: &RunConfig) -> Result<OrdinalTable> {
    match (&cfg.paths.table, &cfg.ordinal.gaussian) {
        (Some(_), None) => {
            let p = existing(&cfg.paths.table, "ordinal table", "--table")?;
            OrdinalTable::read_csv(p).with_context(|| format!("reading {}", p.display()))
        }
        (None, Some(g)) => Ok(ordinal_table_from_gaussian(g.mu[0], g.mu[1], g.rho, &g.cutpoints[0], &g.cutpoints[1])?),
        (Some(_), Some(_)) => bail!("give either --table or ordinal.gaussian in the config, not both"),
        (None, None) => bail!("no ordinal table; pass --table CSV or set ordinal.gaussian in the config"),
    }
}

pub fn run(cfg: &RunConfig) -> Result<()> {
    let start = Instant::now();
    let out = cfg.out_dir()?;
    let table = table_for(cfg)?;
    let _lock = OutputLock::acquire(out)?;
    table.write_csv(&out.join(TABLE_FILE))?;
    let path = out.join(ODDS_FILE);
    let mut w = csv::Writer::from_path(&path).with_context(|| format!("creating {}", path.display()))?;
    w.write_record(["family", "k", "k_prime", "odds_ratio", "log10_odds_ratio"])?;
    let families: [(&str, OddsFn); 3] = [("local", local_odds), ("global", global_odds), ("cumulative", cumulative_odds)];
    for (name, f) in families {
        for k in 1..table.k() {
            for kp in 1..table.k() {
                let (or, lor) = match f(&table, k, kp) {
                    Ok(v) => (fmt_ext(v), log10_text(v)),
                    Err(e) => {
                        log::warn!("{name} odds at ({k}, {kp}) undefined: {e}");
                        ("NA".to_string(), "NA".to_string())
                    }
                };
                w.write_record([name.to_string(), k.to_string(), kp.to_string(), or, lor])?;
            }
        }
    }
    w.flush()?;
    finish("ordinal", cfg, out, None, 0, start)
}

fn log10_text(v: Extended) -> String {
    match v {
        Extended::Finite(0.0) => "-inf".into(),
        Extended::Finite(x) => jsdm_odds::format_float(x.log10()),
        other => fmt_ext(other),
    }
}
