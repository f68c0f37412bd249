//! Prediction lattices, covariate rasters and per-node surface summaries.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{domain, invalid, Error, Result};
use crate::model::{distance, PresenceData};
use crate::tables::Extended;

/// Regular lattice over a rectangle; nodes are listed row by row, `x` fastest.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
    pub nx: usize,
    pub ny: usize,
}

impl Grid {
    pub fn new(x_min: f64, x_max: f64, y_min: f64, y_max: f64, nx: usize, ny: usize) -> Result<Self> {
        if nx < 2 || ny < 2 {
            return Err(invalid(format!("grid needs at least 2 nodes per axis, got {nx}x{ny}")));
        }
        if ![x_min, x_max, y_min, y_max].iter().all(|v| v.is_finite()) || !(x_min < x_max) || !(y_min < y_max) {
            return Err(domain(format!("grid extent [{x_min}, {x_max}] x [{y_min}, {y_max}] is empty")));
        }
        Ok(Self { x_min, x_max, y_min, y_max, nx, ny })
    }

    /// Bounding box of `coords`.
    pub fn covering(coords: &[[f64; 2]], nx: usize, ny: usize) -> Result<Self> {
        let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
        for c in coords {
            x0 = x0.min(c[0]);
            x1 = x1.max(c[0]);
            y0 = y0.min(c[1]);
            y1 = y1.max(c[1]);
        }
        Self::new(x0, x1, y0, y1, nx, ny)
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn node(&self, ix: usize, iy: usize) -> [f64; 2] {
        let fx = ix as f64 / (self.nx - 1) as f64;
        let fy = iy as f64 / (self.ny - 1) as f64;
        [
            self.x_min + fx * (self.x_max - self.x_min),
            self.y_min + fy * (self.y_max - self.y_min),
        ]
    }

    pub fn nodes(&self) -> Vec<[f64; 2]> {
        (0..self.ny)
            .flat_map(|iy| (0..self.nx).map(move |ix| (ix, iy)))
            .map(|(ix, iy)| self.node(ix, iy))
            .collect()
    }
}

/// Covariate vectors (intercept included) at scattered raster points,
/// looked up by nearest neighbour.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CovariateRaster {
    coords: Vec<[f64; 2]>,
    values: DMatrix<f64>,
    cutoff: f64,
}

impl CovariateRaster {
    /// `values` has one row per point; NaN marks a missing covariate. Nodes
    /// farther than `cutoff` from every point are outside the raster; the
    /// default cutoff is the largest nearest-neighbour spacing of the points.
    pub fn new(coords: Vec<[f64; 2]>, values: DMatrix<f64>, cutoff: Option<f64>) -> Result<Self> {
        if coords.is_empty() {
            return Err(invalid("covariate raster has no points"));
        }
        if values.nrows() != coords.len() {
            return Err(Error::Dimension {
                context: "covariate raster",
                expected: format!("{} rows", coords.len()),
                found: format!("{} rows", values.nrows()),
            });
        }
        let cutoff = match cutoff {
            Some(c) if c >= 0.0 => c,
            Some(c) => return Err(domain(format!("raster cutoff must be nonnegative, got {c}"))),
            None => max_nearest_neighbour(&coords),
        };
        Ok(Self { coords, values, cutoff })
    }

    /// The data sites themselves as a raster.
    pub fn from_sites(data: &PresenceData, cutoff: Option<f64>) -> Result<Self> {
        Self::new(data.coords().to_vec(), data.x().clone(), cutoff)
    }

    pub fn n_covariates(&self) -> usize {
        self.values.ncols()
    }

    pub fn cutoff(&self) -> f64 {
        self.cutoff
    }

    /// Covariates of the nearest point, or `None` when the node is outside
    /// the raster or the nearest point has a missing value.
    pub fn lookup(&self, at: [f64; 2]) -> Option<Vec<f64>> {
        let (best, d) = self
            .coords
            .iter()
            .enumerate()
            .map(|(i, c)| (i, distance(*c, at)))
            .min_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)))?;
        if d > self.cutoff {
            return None;
        }
        let row: Vec<f64> = self.values.row(best).iter().copied().collect();
        row.iter().all(|v| v.is_finite()).then_some(row)
    }
}

fn max_nearest_neighbour(coords: &[[f64; 2]]) -> f64 {
    if coords.len() < 2 {
        return f64::INFINITY;
    }
    coords
        .iter()
        .enumerate()
        .map(|(i, a)| {
            coords
                .iter()
                .enumerate()
                .filter(|(k, _)| *k != i)
                .map(|(_, b)| distance(*a, *b))
                .fold(f64::INFINITY, f64::min)
        })
        .fold(0.0, f64::max)
}

/// Posterior summary of one pair at one node.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NodeSummary {
    pub mean_log10_theta: Extended,
    pub q05: Extended,
    pub q95: Extended,
    /// Fraction of draws with theta strictly above 1.
    pub p_exceed: f64,
    pub p11_mean: f64,
    pub p00_mean: f64,
}

/// Surface for one species pair; `None` marks a masked node.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurfaceGrid {
    pub pair: (usize, usize),
    pub grid: Option<Grid>,
    pub nodes: Vec<[f64; 2]>,
    pub summaries: Vec<Option<NodeSummary>>,
}

impl SurfaceGrid {
    pub fn mask(&self) -> Vec<bool> {
        self.summaries.iter().map(Option::is_none).collect()
    }

    pub fn active(&self) -> impl Iterator<Item = &NodeSummary> {
        self.summaries.iter().flatten()
    }
}

/// Summary of per-draw log10 odds ratios and cell probabilities.
pub(crate) fn summarize(log10_theta: &[Extended], p11: &[f64], p00: &[f64]) -> NodeSummary {
    let nd = log10_theta.len() as f64;
    let mut sorted = log10_theta.to_vec();
    sorted.sort_by(Extended::total_cmp);
    NodeSummary {
        mean_log10_theta: extended_mean(log10_theta),
        q05: quantile_sorted(&sorted, 0.05),
        q95: quantile_sorted(&sorted, 0.95),
        p_exceed: log10_theta.iter().filter(|v| v.signum() > 0).count() as f64 / nd,
        p11_mean: p11.iter().sum::<f64>() / nd,
        p00_mean: p00.iter().sum::<f64>() / nd,
    }
}

/// Mean over a mix of finite and extreme values; any extreme dominates,
/// and mixed signs resolve to the more frequent one (a tie gives 0).
pub fn extended_mean(values: &[Extended]) -> Extended {
    let pos = values.iter().filter(|v| **v == Extended::PosInf).count();
    let neg = values.iter().filter(|v| **v == Extended::NegInf).count();
    match pos.cmp(&neg) {
        _ if pos + neg == 0 => {
            let s: f64 = values.iter().filter_map(|v| v.finite()).sum();
            Extended::Finite(s / values.len() as f64)
        }
        std::cmp::Ordering::Greater => Extended::PosInf,
        std::cmp::Ordering::Less => Extended::NegInf,
        std::cmp::Ordering::Equal => Extended::Finite(0.0),
    }
}

/// Linear-interpolation quantile of sorted values; interpolating towards an
/// extreme value gives that extreme.
pub fn quantile_sorted(sorted: &[Extended], q: f64) -> Extended {
    let n = sorted.len();
    if n == 0 {
        return Extended::Finite(f64::NAN);
    }
    let pos = q * (n - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    if lo == hi || frac == 0.0 {
        return sorted[lo];
    }
    match (sorted[lo], sorted[hi]) {
        (Extended::Finite(a), Extended::Finite(b)) => Extended::Finite(a + frac * (b - a)),
        (Extended::Finite(_), e) | (e, _) => e,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_nodes_cover_extent() {
        let g = Grid::new(0.0, 2.0, -1.0, 1.0, 3, 2).unwrap();
        assert_eq!(g.nodes(), vec![[0.0, -1.0], [1.0, -1.0], [2.0, -1.0], [0.0, 1.0], [1.0, 1.0], [2.0, 1.0]]);
        assert!(Grid::new(0.0, 1.0, 0.0, 1.0, 1, 5).is_err());
        assert!(Grid::new(1.0, 1.0, 0.0, 1.0, 2, 2).is_err());
    }

    #[test]
    fn raster_lookup_and_masking() {
        let coords = vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]];
        let values = DMatrix::from_row_slice(3, 2, &[1.0, 0.5, 1.0, f64::NAN, 1.0, -2.0]);
        let r = CovariateRaster::new(coords, values, None).unwrap();
        assert_eq!(r.cutoff(), 1.0);
        assert_eq!(r.lookup([0.1, 0.1]), Some(vec![1.0, 0.5]));
        assert_eq!(r.lookup([0.1, 0.95]), Some(vec![1.0, -2.0]));
        assert_eq!(r.lookup([0.9, 0.0]), None, "missing covariate is masked");
        assert_eq!(r.lookup([5.0, 5.0]), None, "outside the raster");
    }

    #[test]
    fn quantiles_and_means_with_extremes() {
        use Extended::*;
        let v = [Finite(1.0), Finite(2.0), Finite(3.0), Finite(4.0), Finite(5.0)];
        assert_eq!(quantile_sorted(&v, 0.5), Finite(3.0));
        assert_eq!(quantile_sorted(&v, 0.05), Finite(1.2));
        assert_eq!(extended_mean(&v), Finite(3.0));
        let w = [Finite(1.0), Finite(2.0), PosInf];
        assert_eq!(quantile_sorted(&w, 0.95), PosInf);
        assert_eq!(quantile_sorted(&w, 0.25), Finite(1.5));
        assert_eq!(extended_mean(&w), PosInf);
        assert_eq!(extended_mean(&[NegInf, PosInf]), Finite(0.0));
    }

    #[test]
    fn exceedance_is_strict() {
        use Extended::*;
        let s = summarize(&[Finite(0.0), Finite(0.0), Finite(1e-300), Finite(-1.0)], &[0.1; 4], &[0.2; 4]);
        assert_eq!(s.p_exceed, 0.25);
        assert!((s.p11_mean - 0.1).abs() < 1e-15);
    }
}
