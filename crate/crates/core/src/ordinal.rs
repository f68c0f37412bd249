//! Odds ratios of K x K ordinal tables: local, global and cumulative.
//!
//! Categories are numbered 1..=K. Every odds ratio here is the odds ratio
//! of some 2x2 table, so zero denominators come back as tagged extremes.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{domain, format_err, invalid, Result};
use crate::fmt::format_float;
use crate::prob_core::{bvn_unchecked, ln_orthant, BvnParams};
use crate::tables::{odds_ratio, Extended, PairTable};

/// Tolerance on the cell total.
pub const SUM_TOL: f64 = 1e-10;

/// Joint category probabilities; row = species j, column = species j'.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrdinalTable {
    k: usize,
    cells: Vec<f64>,
}

impl OrdinalTable {
    /// `cells` is row-major, `k * k` long, non-negative and summing to 1.
    pub fn new(k: usize, cells: Vec<f64>) -> Result<Self> {
        if k < 2 {
            return Err(invalid(format!("ordinal tables need K >= 2, got {k}")));
        }
        if cells.len() != k * k {
            return Err(invalid(format!("expected {} cells for K = {k}, got {}", k * k, cells.len())));
        }
        if let Some(i) = cells.iter().position(|p| !p.is_finite() || *p < 0.0) {
            return Err(domain(format!("cell ({}, {}) = {} is not a probability", i / k + 1, i % k + 1, cells[i])));
        }
        let total: f64 = cells.iter().sum();
        if (total - 1.0).abs() > SUM_TOL {
            return Err(domain(format!("cells sum to {total}, not 1")));
        }
        Ok(Self { k, cells })
    }

    /// Outer product of two category distributions.
    pub fn independent(row: &[f64], col: &[f64]) -> Result<Self> {
        if row.len() != col.len() {
            return Err(invalid("marginals must have the same number of categories"));
        }
        let cells = row.iter().flat_map(|a| col.iter().map(move |b| a * b)).collect();
        Self::new(row.len(), cells)
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn cells(&self) -> &[f64] {
        &self.cells
    }

    /// Cell `(a, b)`, 1-based.
    pub fn get(&self, a: usize, b: usize) -> f64 {
        self.cells[(a - 1) * self.k + (b - 1)]
    }

    /// Sum over rows `rows` and columns `cols` (1-based, inclusive).
    fn block(&self, rows: std::ops::RangeInclusive<usize>, cols: std::ops::RangeInclusive<usize>) -> f64 {
        let mut s = 0.0;
        for a in rows {
            for b in cols.clone() {
                s += self.get(a, b);
            }
        }
        s
    }

    fn check_split(&self, k: usize, kp: usize) -> Result<()> {
        let top = self.k - 1;
        if !(1..=top).contains(&k) || !(1..=top).contains(&kp) {
            return Err(invalid(format!("split ({k}, {kp}) outside 1..={top}")));
        }
        Ok(())
    }

    /// Writes a header `row,1,...,K` followed by one labelled row per category.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        let mut head = vec!["row".to_string()];
        head.extend((1..=self.k).map(|c| c.to_string()));
        w.write_record(&head)?;
        for a in 1..=self.k {
            let mut rec = vec![a.to_string()];
            rec.extend((1..=self.k).map(|b| format_float(self.get(a, b))));
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv(path: &Path) -> Result<Self> {
        let name = path.display().to_string();
        let mut rdr = csv::Reader::from_path(path)?;
        let k = rdr.headers()?.len().saturating_sub(1);
        let mut cells = Vec::with_capacity(k * k);
        let mut rows = 0;
        for (i, rec) in rdr.records().enumerate() {
            let rec = rec?;
            if rec.len() != k + 1 {
                return Err(format_err(&name, format!("row {}: expected {} fields", i + 2, k + 1)));
            }
            for (c, field) in rec.iter().skip(1).enumerate() {
                let v: f64 = field.trim().parse().map_err(|_| {
                    format_err(&name, format!("row {}, column {}: {field:?} is not a number", i + 2, c + 1))
                })?;
                cells.push(v);
            }
            rows += 1;
        }
        if rows != k {
            return Err(format_err(&name, format!("header declares K = {k} but found {rows} rows")));
        }
        Self::new(k, cells)
    }
}

fn theta(a: f64, b: f64, c: f64, d: f64) -> Result<Extended> {
    odds_ratio(&PairTable::new(a, b, c, d)?)
}

/// Adjacent-cell odds ratio at `(k, k')`.
pub fn local_odds(t: &OrdinalTable, k: usize, kp: usize) -> Result<Extended> {
    t.check_split(k, kp)?;
    theta(t.get(k, kp), t.get(k, kp + 1), t.get(k + 1, kp), t.get(k + 1, kp + 1))
}

/// Odds ratio of the table collapsed at `Y <= k`, `Y' <= k'`.
pub fn global_odds(t: &OrdinalTable, k: usize, kp: usize) -> Result<Extended> {
    t.check_split(k, kp)?;
    let n = t.k();
    theta(
        t.block(1..=k, 1..=kp),
        t.block(1..=k, kp + 1..=n),
        t.block(k + 1..=n, 1..=kp),
        t.block(k + 1..=n, kp + 1..=n),
    )
}

/// `odds(Y' <= k' | Y = k) / odds(Y' <= k' | Y = k + 1)`.
pub fn cumulative_odds(t: &OrdinalTable, k: usize, kp: usize) -> Result<Extended> {
    t.check_split(k, kp)?;
    let n = t.k();
    for row in [k, k + 1] {
        if t.block(row..=row, 1..=n) == 0.0 {
            return Err(domain(format!("row {row} has no mass; its conditional odds are undefined")));
        }
    }
    theta(
        t.block(k..=k, 1..=kp),
        t.block(k..=k, kp + 1..=n),
        t.block(k + 1..=k + 1, 1..=kp),
        t.block(k + 1..=k + 1, kp + 1..=n),
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OddsFamily {
    Local,
    Global,
    Cumulative,
}

/// All `(K-1) x (K-1)` odds ratios of one family, row-major.
pub fn odds_matrix(t: &OrdinalTable, family: OddsFamily) -> Result<Vec<Vec<Extended>>> {
    let f = match family {
        OddsFamily::Local => local_odds,
        OddsFamily::Global => global_odds,
        OddsFamily::Cumulative => cumulative_odds,
    };
    (1..t.k()).map(|k| (1..t.k()).map(|kp| f(t, k, kp)).collect()).collect()
}

fn check_cutpoints(c: &[f64], which: &str) -> Result<()> {
    if c.iter().any(|v| !v.is_finite()) {
        return Err(domain(format!("{which} cutpoints must be finite")));
    }
    if c.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(domain(format!("{which} cutpoints must be strictly increasing: {c:?}")));
    }
    Ok(())
}

/// `P(l1 <= Z1 < u1, l2 <= Z2 < u2)` for standardized bounds. Intervals whose
/// centre lies above zero are reflected so the evaluation works with lower
/// orthants, which keeps semi-infinite cells free of cancellation.
fn rectangle(mut a1: f64, mut b1: f64, mut a2: f64, mut b2: f64, rho: f64) -> f64 {
    let mut r = rho;
    if a1 + b1 > 0.0 {
        (a1, b1) = (-b1, -a1);
        r = -r;
    }
    if a2 + b2 > 0.0 {
        (a2, b2) = (-b2, -a2);
        r = -r;
    }
    if a1 == f64::NEG_INFINITY && a2 == f64::NEG_INFINITY {
        return ln_orthant(b1, b2, r).exp();
    }
    let v = bvn_unchecked(b1, b2, r) - bvn_unchecked(a1, b2, r) - bvn_unchecked(b1, a2, r)
        + bvn_unchecked(a1, a2, r);
    v.max(0.0)
}

/// Table of a latent pair `Z ~ N((mu1, mu2), [[1, rho], [rho, 1]])` cut at the
/// given points: category `c` holds `cut[c-2] <= Z < cut[c-1]`.
pub fn ordinal_table_from_gaussian(
    mu1: f64,
    mu2: f64,
    rho: f64,
    cutpoints_j: &[f64],
    cutpoints_jp: &[f64],
) -> Result<OrdinalTable> {
    BvnParams::new(mu1, mu2, rho)?;
    check_cutpoints(cutpoints_j, "first species")?;
    check_cutpoints(cutpoints_jp, "second species")?;
    if cutpoints_j.is_empty() || cutpoints_j.len() != cutpoints_jp.len() {
        return Err(invalid("both species need the same, non-zero number of cutpoints"));
    }
    let k = cutpoints_j.len() + 1;
    let bounds = |c: &[f64], mu: f64| -> Vec<(f64, f64)> {
        (0..k)
            .map(|i| {
                let lo = if i == 0 { f64::NEG_INFINITY } else { c[i - 1] - mu };
                let hi = if i == k - 1 { f64::INFINITY } else { c[i] - mu };
                (lo, hi)
            })
            .collect()
    };
    let (r1, r2) = (bounds(cutpoints_j, mu1), bounds(cutpoints_jp, mu2));
    let mut cells = Vec::with_capacity(k * k);
    for &(a1, b1) in &r1 {
        for &(a2, b2) in &r2 {
            cells.push(rectangle(a1, b1, a2, b2, rho));
        }
    }
    OrdinalTable::new(k, cells)
}
