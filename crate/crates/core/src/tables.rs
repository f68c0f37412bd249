//! 2x2 presence/absence tables and their odds ratios.

use std::cmp::Ordering;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};

/// Default relative tolerance for [`classify_dependence`].
pub const DEFAULT_CLASSIFY_TOL: f64 = 1e-6;

/// A real number extended with tagged infinities.
///
/// Odds ratios become infinite when an off-diagonal cell is exactly zero;
/// the tags keep that distinguishable from overflow garbage and print as
/// `+extreme` / `-extreme` instead of a float infinity.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
pub enum Extended {
    NegInf,
    Finite(f64),
    PosInf,
}

impl Extended {
    /// Maps float infinities onto the tags. NaN is rejected.
    pub fn from_f64(v: f64) -> Result<Self> {
        if v.is_nan() {
            Err(domain("NaN cannot be represented as an extended real"))
        } else if v == f64::INFINITY {
            Ok(Extended::PosInf)
        } else if v == f64::NEG_INFINITY {
            Ok(Extended::NegInf)
        } else {
            Ok(Extended::Finite(v))
        }
    }

    pub fn is_finite(self) -> bool {
        matches!(self, Extended::Finite(_))
    }

    /// The value as an `f64`, with the tags mapped to float infinities.
    pub fn to_f64(self) -> f64 {
        match self {
            Extended::NegInf => f64::NEG_INFINITY,
            Extended::Finite(v) => v,
            Extended::PosInf => f64::INFINITY,
        }
    }

    pub fn finite(self) -> Option<f64> {
        match self {
            Extended::Finite(v) => Some(v),
            _ => None,
        }
    }

    /// -1, 0 or +1; zero only for an exact zero.
    pub fn signum(self) -> i8 {
        match self {
            Extended::NegInf => -1,
            Extended::PosInf => 1,
            Extended::Finite(v) if v > 0.0 => 1,
            Extended::Finite(v) if v < 0.0 => -1,
            Extended::Finite(_) => 0,
        }
    }

    pub fn total_cmp(&self, other: &Self) -> Ordering {
        self.partial_cmp(other).unwrap_or(Ordering::Equal)
    }
}

impl fmt::Display for Extended {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Extended::NegInf => f.write_str("-extreme"),
            Extended::Finite(v) => write!(f, "{v}"),
            Extended::PosInf => f.write_str("+extreme"),
        }
    }
}

/// Cell probabilities `(p00, p01, p10, p11)` for a species pair; the first
/// index is species j (0 absent, 1 present), the second species j'.
///
/// Cells are held as natural logs so tables built from rare species keep
/// their ratios when the probabilities themselves underflow. Totals need
/// not equal one.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairTable {
    ln_cells: [f64; 4],
    /// Exact outer product of two marginals, so the odds ratio is exactly one.
    product_form: bool,
    /// The cells as given, when built from probabilities.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    linear: Option<[f64; 4]>,
}

impl PairTable {
    pub fn new(p00: f64, p01: f64, p10: f64, p11: f64) -> Result<Self> {
        let cells = [p00, p01, p10, p11];
        if cells.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return Err(domain(format!("table cells must be finite and non-negative: {cells:?}")));
        }
        if cells.iter().all(|&p| p == 0.0) {
            return Err(domain("table has zero total"));
        }
        Ok(Self { ln_cells: cells.map(f64::ln), product_form: false, linear: Some(cells) })
    }

    pub fn from_ln_cells(ln_cells: [f64; 4]) -> Result<Self> {
        if ln_cells.iter().any(|v| v.is_nan() || *v == f64::INFINITY) {
            return Err(domain(format!("invalid log cells {ln_cells:?}")));
        }
        if ln_cells.iter().all(|&v| v == f64::NEG_INFINITY) {
            return Err(domain("table has zero total"));
        }
        Ok(Self { ln_cells, product_form: false, linear: None })
    }

    /// Product table of two independent indicators with presence probabilities `p1`, `p2`.
    pub fn independent(p1: f64, p2: f64) -> Result<Self> {
        for p in [p1, p2] {
            if !(0.0..=1.0).contains(&p) {
                return Err(domain(format!("marginal probability {p} outside [0, 1]")));
            }
        }
        Ok(Self::independent_from_ln_marginals(p1.ln(), p2.ln(), (1.0 - p1).ln(), (1.0 - p2).ln()))
    }

    /// Product table from log presence (`ln_p*`) and log absence (`ln_q*`) probabilities.
    pub(crate) fn independent_from_ln_marginals(ln_p1: f64, ln_p2: f64, ln_q1: f64, ln_q2: f64) -> Self {
        Self {
            ln_cells: [ln_q1 + ln_q2, ln_q1 + ln_p2, ln_p1 + ln_q2, ln_p1 + ln_p2],
            product_form: true,
            linear: None,
        }
    }

    pub fn ln_cells(&self) -> [f64; 4] {
        self.ln_cells
    }

    pub fn probs(&self) -> [f64; 4] {
        self.ln_cells.map(f64::exp)
    }

    pub fn p00(&self) -> f64 {
        self.ln_cells[0].exp()
    }

    pub fn p01(&self) -> f64 {
        self.ln_cells[1].exp()
    }

    pub fn p10(&self) -> f64 {
        self.ln_cells[2].exp()
    }

    pub fn p11(&self) -> f64 {
        self.ln_cells[3].exp()
    }

    /// Row marginal `p1. = p10 + p11` (species j present).
    pub fn p1_dot(&self) -> f64 {
        self.p10() + self.p11()
    }

    /// Column marginal `p.1 = p01 + p11` (species j' present).
    pub fn p_dot1(&self) -> f64 {
        self.p01() + self.p11()
    }

    pub fn total(&self) -> f64 {
        self.ln_total().exp()
    }

    pub fn ln_total(&self) -> f64 {
        ln_sum(&self.ln_cells)
    }

    pub fn is_product_form(&self) -> bool {
        self.product_form
    }

    /// Multiplies every cell by `c > 0`.
    pub fn scaled(&self, c: f64) -> Result<Self> {
        if !(c > 0.0) || !c.is_finite() {
            return Err(domain(format!("scale factor must be positive and finite, got {c}")));
        }
        let lc = c.ln();
        Ok(Self { ln_cells: self.ln_cells.map(|v| v + lc), product_form: self.product_form, linear: None })
    }

    /// Swaps the roles of the two species.
    pub fn transposed(&self) -> Self {
        let swap = |[a, b, c, d]: [f64; 4]| [a, c, b, d];
        Self { ln_cells: swap(self.ln_cells), product_form: self.product_form, linear: self.linear.map(swap) }
    }
}

fn ln_sum(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    max + values.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}

/// Natural-log odds ratio as an extended real.
pub fn ln_odds_ratio(t: &PairTable) -> Result<Extended> {
    if t.product_form {
        return Ok(Extended::Finite(0.0));
    }
    let [l00, l01, l10, l11] = t.ln_cells;
    let num = l11 + l00;
    let den = l10 + l01;
    match (num == f64::NEG_INFINITY, den == f64::NEG_INFINITY) {
        (true, true) => Err(domain("odds ratio is 0/0: a diagonal and an off-diagonal cell are both zero")),
        (false, true) => Ok(Extended::PosInf),
        (true, false) => Ok(Extended::NegInf),
        (false, false) => Ok(Extended::Finite(num - den)),
    }
}

/// `theta = p11 p00 / (p10 p01)`. A zero off-diagonal gives `PosInf`.
pub fn odds_ratio(t: &PairTable) -> Result<Extended> {
    if let (false, Some([p00, p01, p10, p11])) = (t.product_form, t.linear) {
        let (num, den) = (p11 * p00, p10 * p01);
        if num.is_normal() && den.is_normal() {
            let theta = num / den;
            if theta.is_normal() {
                return Ok(Extended::Finite(theta));
            }
        }
    }
    Ok(match ln_odds_ratio(t)? {
        Extended::Finite(v) => {
            let theta = v.exp();
            if theta.is_finite() {
                Extended::Finite(theta)
            } else {
                Extended::PosInf
            }
        }
        Extended::NegInf => Extended::Finite(0.0),
        Extended::PosInf => Extended::PosInf,
    })
}

/// Base-10 log odds ratio, computed from the log cells.
pub fn log10_odds_ratio(t: &PairTable) -> Result<Extended> {
    Ok(match ln_odds_ratio(t)? {
        Extended::Finite(v) => Extended::Finite(v / std::f64::consts::LN_10),
        other => other,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Dependence {
    Sympatric,
    Allopatric,
    Independent,
}

impl fmt::Display for Dependence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Dependence::Sympatric => "sympatric",
            Dependence::Allopatric => "allopatric",
            Dependence::Independent => "independent",
        })
    }
}

/// Sympatric when `p11 > p1. p.1 (1 + tol)`, allopatric when
/// `p11 < p1. p.1 (1 - tol)`, otherwise independent; cells are normalized first.
pub fn classify_dependence(t: &PairTable, tol: f64) -> Result<Dependence> {
    if !(tol > 0.0 && tol < 1.0) {
        return Err(domain(format!("classification tolerance must lie in (0, 1), got {tol}")));
    }
    let n = renormalize(t)?;
    let [_, l01, l10, l11] = n.ln_cells;
    let ln_row = ln_sum(&[l10, l11]);
    let ln_col = ln_sum(&[l01, l11]);
    let ln_indep = ln_row + ln_col;
    if l11 > ln_indep + tol.ln_1p() {
        Ok(Dependence::Sympatric)
    } else if l11 < ln_indep + (-tol).ln_1p() {
        Ok(Dependence::Allopatric)
    } else {
        Ok(Dependence::Independent)
    }
}

/// Rescales the cells to sum to one; the odds ratio is unchanged.
pub fn renormalize(t: &PairTable) -> Result<PairTable> {
    let lt = t.ln_total();
    if !lt.is_finite() {
        return Err(domain("cannot renormalize a table with zero or infinite total"));
    }
    Ok(PairTable { ln_cells: t.ln_cells.map(|v| v - lt), product_form: t.product_form, linear: None })
}
