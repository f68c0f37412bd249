//! Bivariate normal orthant probabilities.
//!
//! The main route is Gauss-Legendre quadrature of the Drezner-Wesolowsky
//! correlation integral (6, 12 or 20 nodes depending on |rho|) with the
//! Genz asymptotic treatment for |rho| >= 0.925. Orthants whose probability
//! underflows are handled by a log-space integral over the first coordinate.

use serde::{Deserialize, Serialize};

use super::normal::{inverse_mills, ln_std_normal_cdf, ln_std_normal_pdf, phi};
use crate::error::{domain, Result};
use crate::tables::PairTable;

const TWO_PI: f64 = std::f64::consts::TAU;

/// Orthants below this probability are recomputed in log space.
pub const LOG_ROUTE_THRESHOLD: f64 = 1e-300;

/// The quadrature route subtracts terms of size `Phi(h)Phi(k)` (rho < 0) or
/// `min(Phi(h), Phi(k))` (rho >= 0.925); a result this much smaller than
/// that scale has lost relative precision and is recomputed in log space.
const CANCELLATION_RATIO: f64 = 1e-3;

// Gauss-Legendre half-rules (negative abscissae) for 6, 12 and 20 nodes.
const GL6: [(f64, f64); 3] = [
    (0.171_324_492_379_170_5, -0.932_469_514_203_152_2),
    (0.360_761_573_048_138_4, -0.661_209_386_466_264_7),
    (0.467_913_934_572_690_4, -0.238_619_186_083_197),
];
const GL12: [(f64, f64); 6] = [
    (0.047_175_336_386_511_77, -0.981_560_634_246_719_1),
    (0.106_939_325_995_318_3, -0.904_117_256_370_475),
    (0.160_078_328_543_346_4, -0.769_902_674_194_305),
    (0.203_167_426_723_065_9, -0.587_317_954_286_617_1),
    (0.233_492_536_538_354_7, -0.367_831_498_998_180_2),
    (0.249_147_045_813_402_9, -0.125_233_408_511_469_2),
];
const GL20: [(f64, f64); 10] = [
    (0.017_614_007_139_152_12, -0.993_128_599_185_094_9),
    (0.040_601_429_800_386_94, -0.963_971_927_277_913_8),
    (0.062_672_048_334_109_06, -0.912_234_428_251_325_9),
    (0.083_276_741_576_704_75, -0.839_116_971_822_218_8),
    (0.101_930_119_817_240_4, -0.746_331_906_460_150_8),
    (0.118_194_531_961_518_4, -0.636_053_680_726_515),
    (0.131_688_638_449_176_6, -0.510_867_001_950_827_1),
    (0.142_096_109_318_382_1, -0.373_706_088_715_419_6),
    (0.149_172_986_472_603_7, -0.227_785_851_141_645_1),
    (0.152_753_387_130_725_9, -0.076_526_521_133_497_33),
];

// 10-point Gauss-Legendre rule on [-1, 1], used by the log-space route.
const GL10_NODES: [f64; 5] = [
    0.148_874_338_981_631_2,
    0.433_395_394_129_247_2,
    0.679_409_568_299_024_4,
    0.865_063_366_688_984_5,
    0.973_906_528_517_171_7,
];
const GL10_WEIGHTS: [f64; 5] = [
    0.295_524_224_714_752_9,
    0.269_266_719_309_996_3,
    0.219_086_362_515_982,
    0.149_451_349_150_580_6,
    0.066_671_344_308_688_14,
];

/// Latent bivariate normal for one species pair: means, unit variances, correlation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BvnParams {
    pub mu1: f64,
    pub mu2: f64,
    pub rho: f64,
}

impl BvnParams {
    pub fn new(mu1: f64, mu2: f64, rho: f64) -> Result<Self> {
        if !mu1.is_finite() || !mu2.is_finite() {
            return Err(domain(format!("latent means must be finite, got ({mu1}, {mu2})")));
        }
        check_rho(rho)?;
        Ok(Self { mu1, mu2, rho })
    }
}

fn check_rho(rho: f64) -> Result<()> {
    if rho.is_nan() || rho.abs() > 1.0 {
        return Err(domain(format!("correlation must lie in [-1, 1], got {rho}")));
    }
    Ok(())
}

fn check_limit(name: &str, v: f64) -> Result<()> {
    if v.is_nan() {
        return Err(domain(format!("{name} is NaN")));
    }
    Ok(())
}

/// `P(Z1 <= h, Z2 <= k)` for a standard bivariate normal with correlation `rho`.
///
/// `h` and `k` may be infinite. Absolute error is below 1e-14.
pub fn bvn_cdf(h: f64, k: f64, rho: f64) -> Result<f64> {
    check_limit("h", h)?;
    check_limit("k", k)?;
    check_rho(rho)?;
    Ok(bvn_unchecked(h, k, rho))
}

pub(crate) fn bvn_unchecked(h: f64, k: f64, rho: f64) -> f64 {
    // fixed argument order keeps the result exactly symmetric
    let (h, k) = if k < h { (k, h) } else { (h, k) };
    if h == f64::NEG_INFINITY || k == f64::NEG_INFINITY {
        return 0.0;
    }
    if h == f64::INFINITY {
        return phi(k);
    }
    if k == f64::INFINITY {
        return phi(h);
    }
    if rho == 1.0 {
        return phi(h.min(k));
    }
    if rho == -1.0 {
        // P(-k <= Z1 <= h)
        return if h > -k { (phi(h) - phi(-k)).max(0.0) } else { 0.0 };
    }
    bvnu(-h, -k, rho).clamp(0.0, 1.0)
}

/// Upper orthant `P(Z1 > h, Z2 > k)`, Genz's BVNU.
fn bvnu(h: f64, k: f64, r: f64) -> f64 {
    let rule: &[(f64, f64)] = if r.abs() < 0.3 {
        &GL6
    } else if r.abs() < 0.75 {
        &GL12
    } else {
        &GL20
    };
    let mut hk = h * k;
    if r.abs() < 0.925 {
        if r == 0.0 {
            return phi(-h) * phi(-k);
        }
        let hs = 0.5 * (h * h + k * k);
        let asr = r.asin();
        let mut bvn = 0.0;
        for &(w, x) in rule {
            let sn = (asr * (x + 1.0) / 2.0).sin();
            bvn += w * ((sn * hk - hs) / (1.0 - sn * sn)).exp();
            let sn = (asr * (1.0 - x) / 2.0).sin();
            bvn += w * ((sn * hk - hs) / (1.0 - sn * sn)).exp();
        }
        return bvn * asr / (2.0 * TWO_PI) + phi(-h) * phi(-k);
    }

    let mut k = k;
    if r < 0.0 {
        k = -k;
        hk = -hk;
    }
    let as_ = (1.0 - r) * (1.0 + r);
    let mut a = as_.sqrt();
    let bs = (h - k) * (h - k);
    let c = (4.0 - hk) / 8.0;
    let d = (12.0 - hk) / 16.0;
    let mut bvn = a
        * (-(bs / as_ + hk) / 2.0).exp()
        * (1.0 - c * (bs - as_) * (1.0 - d * bs / 5.0) / 3.0 + c * d * as_ * as_ / 5.0);
    if hk > -160.0 {
        let b = bs.sqrt();
        bvn -= (-hk / 2.0).exp()
            * TWO_PI.sqrt()
            * phi(-b / a)
            * b
            * (1.0 - c * bs * (1.0 - d * bs / 5.0) / 3.0);
    }
    a /= 2.0;
    for &(w, x) in rule {
        for xi in [x, -x] {
            let xs = (a * (xi + 1.0)).powi(2);
            let rs = (1.0 - xs).sqrt();
            bvn += a
                * w
                * (-(bs / xs + hk) / 2.0).exp()
                * ((-hk * (1.0 - rs) / (2.0 * (1.0 + rs))).exp() / rs
                    - (1.0 + c * xs * (1.0 + d * xs)));
        }
    }
    bvn = -bvn / TWO_PI;
    if r > 0.0 {
        bvn + phi(-h.max(k))
    } else {
        -bvn + (phi(-h) - phi(-k)).max(0.0)
    }
}

/// Natural log of [`bvn_cdf`], accurate where the probability underflows.
pub fn ln_bvn_cdf(h: f64, k: f64, rho: f64) -> Result<f64> {
    check_limit("h", h)?;
    check_limit("k", k)?;
    check_rho(rho)?;
    Ok(ln_bvn_unchecked(h, k, rho))
}

pub(crate) fn ln_bvn_unchecked(h: f64, k: f64, rho: f64) -> f64 {
    let (h, k) = if k < h { (k, h) } else { (h, k) };
    let direct = bvn_unchecked(h, k, rho);
    if direct > LOG_ROUTE_THRESHOLD && !cancelled(direct, h, k, rho) {
        return direct.ln();
    }
    if h == f64::NEG_INFINITY || k == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    if h == f64::INFINITY {
        return ln_std_normal_cdf(k);
    }
    if k == f64::INFINITY {
        return ln_std_normal_cdf(h);
    }
    if rho == 1.0 {
        return ln_std_normal_cdf(h.min(k));
    }
    if rho == -1.0 {
        return ln_interval(-k, h);
    }
    if rho == 0.0 {
        return ln_std_normal_cdf(h) + ln_std_normal_cdf(k);
    }
    ln_orthant_integral(h, k, rho)
}

fn cancelled(p: f64, h: f64, k: f64, rho: f64) -> bool {
    if rho.abs() == 1.0 || !h.is_finite() || !k.is_finite() {
        return false;
    }
    if rho < 0.0 {
        p < CANCELLATION_RATIO * phi(h) * phi(k)
    } else if rho >= 0.925 {
        p < CANCELLATION_RATIO * phi(h.min(k))
    } else {
        false
    }
}

/// `ln P(a < Z < b)` for a standard normal.
fn ln_interval(a: f64, b: f64) -> f64 {
    if b <= a {
        return f64::NEG_INFINITY;
    }
    if b <= 0.0 {
        let (la, lb) = (ln_std_normal_cdf(a), ln_std_normal_cdf(b));
        lb + ln_1m_exp(la - lb)
    } else if a >= 0.0 {
        let (la, lb) = (ln_std_normal_cdf(-a), ln_std_normal_cdf(-b));
        la + ln_1m_exp(lb - la)
    } else {
        (phi(b) - phi(a)).ln()
    }
}

/// ln(1 - e^x) for x <= 0.
fn ln_1m_exp(x: f64) -> f64 {
    if x > -std::f64::consts::LN_2 {
        (-x.exp_m1()).ln()
    } else {
        (-x.exp()).ln_1p()
    }
}

/// `ln ∫_{-∞}^{h} phi(x) Phi((k - rho x)/s) dx` with `s = sqrt(1 - rho^2)`.
///
/// The integrand is log-concave with curvature in [1, 1/s^2], so panels are
/// laid outward from the mode with widths set by the local slope and
/// curvature until the log-integrand has fallen 40 units below its peak.
fn ln_orthant_integral(h: f64, k: f64, rho: f64) -> f64 {
    let s = ((1.0 - rho) * (1.0 + rho)).sqrt();
    let slope_coef = rho / s;
    let g = |x: f64| ln_std_normal_pdf(x) + ln_std_normal_cdf((k - rho * x) / s);
    let dg = |x: f64| -x - slope_coef * inverse_mills((k - rho * x) / s);
    let d2g = |x: f64| {
        let t = (k - rho * x) / s;
        let m = inverse_mills(t);
        -1.0 - slope_coef * slope_coef * m * (t + m)
    };

    let mode = if dg(h) >= 0.0 {
        h
    } else {
        let mut hi = h;
        let mut step = 1.0;
        let mut lo = h - step;
        while dg(lo) < 0.0 {
            hi = lo;
            step *= 2.0;
            lo = h - step;
        }
        // dg is decreasing: dg(lo) >= 0 > dg(hi)
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if dg(mid) >= 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo <= 1e-12 * (1.0 + mid.abs()) {
                break;
            }
        }
        0.5 * (lo + hi)
    };

    let peak = g(mode);
    let panel_width = |x: f64| 0.5 / (-d2g(x)).sqrt().max(dg(x).abs()).max(1e-3);
    let mut acc = LogSum::new();
    let mut add_panel = |a: f64, b: f64| {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        for (&node, &w) in GL10_NODES.iter().zip(GL10_WEIGHTS.iter()) {
            for x in [mid - half * node, mid + half * node] {
                acc.add((w * half).ln() + g(x));
            }
        }
    };

    // left of the mode
    let mut right = mode;
    for _ in 0..20_000 {
        let left = right - panel_width(right);
        add_panel(left, right);
        right = left;
        if g(left) < peak - 40.0 {
            break;
        }
    }
    // right of the mode, up to h
    let mut left = mode;
    for _ in 0..20_000 {
        if left >= h {
            break;
        }
        let right = (left + panel_width(left)).min(h);
        add_panel(left, right);
        left = right;
        if g(right) < peak - 40.0 {
            break;
        }
    }
    acc.value()
}

/// Running log-sum-exp.
struct LogSum {
    max: f64,
    sum: f64,
}

impl LogSum {
    fn new() -> Self {
        Self { max: f64::NEG_INFINITY, sum: 0.0 }
    }

    fn add(&mut self, v: f64) {
        if v == f64::NEG_INFINITY {
            return;
        }
        if v > self.max {
            self.sum = self.sum * (self.max - v).exp() + 1.0;
            self.max = v;
        } else {
            self.sum += (v - self.max).exp();
        }
    }

    fn value(&self) -> f64 {
        if self.max == f64::NEG_INFINITY {
            f64::NEG_INFINITY
        } else {
            self.max + self.sum.ln()
        }
    }
}

/// The four orthant probabilities of a latent pair thresholded at zero.
///
/// Presence is `Z >= 0`. Each cell is evaluated directly rather than by
/// differencing marginals, and in log space when it underflows.
/// Log orthant probability as used for table cells; at `rho == 0` the sum of
/// the univariate logs.
pub(crate) fn ln_orthant(h: f64, k: f64, rho: f64) -> f64 {
    if rho == 0.0 {
        ln_std_normal_cdf(h) + ln_std_normal_cdf(k)
    } else {
        ln_bvn_unchecked(h, k, rho)
    }
}

pub fn cell_probs(params: BvnParams) -> Result<PairTable> {
    let BvnParams { mu1, mu2, rho } = BvnParams::new(params.mu1, params.mu2, params.rho)?;
    if rho == 0.0 {
        return Ok(PairTable::independent_from_ln_marginals(
            ln_std_normal_cdf(mu1),
            ln_std_normal_cdf(mu2),
            ln_std_normal_cdf(-mu1),
            ln_std_normal_cdf(-mu2),
        ));
    }
    let ln00 = ln_bvn_unchecked(-mu1, -mu2, rho);
    let ln01 = ln_bvn_unchecked(-mu1, mu2, -rho);
    let ln10 = ln_bvn_unchecked(mu1, -mu2, -rho);
    let ln11 = ln_bvn_unchecked(mu1, mu2, rho);
    PairTable::from_ln_cells([ln00, ln01, ln10, ln11])
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    // 40-digit quadrature of phi(x) Phi((k - rho x)/s) (mpmath).
    const BVN_ORACLE: [(f64, f64, f64, f64); 16] = [
        (0.3, -0.7, 0.6, 0.217_167_225_451_906_38),
        (1.0, 2.0, 0.3, 0.827_282_511_535_083),
        (-1.5, 0.5, -0.8, 0.003_712_111_435_901_822),
        (2.5, -2.5, 0.95, 0.006_209_665_325_776_135),
        (-3.0, -3.0, 0.99, 0.001_101_519_998_620_622_5),
        (0.1, 0.2, -0.95, 0.130_743_053_588_956_36),
        (-2.0, -1.0, 0.5, 0.013_266_217_010_516_736),
        (4.0, 4.0, -0.5, 0.999_936_657_516_333_8),
        (-0.5, -0.5, 0.9999, 0.306_551_210_410_431_1),
        (1.3, -0.2, -0.3, 0.359_318_393_924_777_3),
        (-6.0, -6.0, 0.7, 9.689_194_672_069_035e-12),
        (-8.0, 2.0, 0.2, 6.220_284_549_051_342e-16),
        (-3.0, -4.0, -0.6, 1.060_044_942_217_409_2e-16),
        (0.7, 0.7, 0.999, 0.752_465_113_270_249_8),
        (-1.2, -3.4, 0.935, 0.000_336_929_264_896_117_75),
        (2.2, 1.1, -0.93, 0.850_430_491_540_118_7),
    ];

    #[test]
    fn bvn_matches_high_precision_oracle() {
        for (h, k, r, want) in BVN_ORACLE {
            let got = bvn_cdf(h, k, r).unwrap();
            assert!((got - want).abs() <= 1e-14, "({h},{k},{r}): {got} vs {want}");
            let ln_got = ln_bvn_cdf(h, k, r).unwrap();
            let rel = (ln_got.exp() - want).abs() / want;
            assert!(rel < 1e-10, "({h},{k},{r}) relative error {rel}");
        }
    }

    #[test]
    fn bvn_closed_forms() {
        assert_eq!(bvn_cdf(0.0, 0.0, 0.0).unwrap(), 0.25);
        assert!((bvn_cdf(0.0, 0.0, 0.5).unwrap() - 1.0 / 3.0).abs() < 1e-15);
        for i in 0..=40 {
            let r = (i as f64 - 20.0) / 20.0;
            let want = 0.25 + r.asin() / (2.0 * PI);
            assert!((bvn_cdf(0.0, 0.0, r).unwrap() - want).abs() < 1e-12, "rho={r}");
        }
    }

    #[test]
    fn bvn_limits_and_errors() {
        assert_eq!(bvn_cdf(f64::NEG_INFINITY, 1.0, 0.3).unwrap(), 0.0);
        assert_eq!(bvn_cdf(f64::INFINITY, 0.4, 0.3).unwrap(), phi(0.4));
        assert_eq!(bvn_cdf(1.0, 0.5, 1.0).unwrap(), phi(0.5));
        assert!((bvn_cdf(1.0, 0.5, -1.0).unwrap() - (phi(1.0) - phi(-0.5))).abs() < 1e-15);
        assert_eq!(bvn_cdf(-1.0, 0.5, -1.0).unwrap(), 0.0);
        assert!(bvn_cdf(0.0, 0.0, 1.0001).is_err());
        assert!(bvn_cdf(0.0, f64::NAN, 0.1).is_err());
    }

    #[test]
    fn ln_route_matches_high_precision_oracle() {
        let cases = [
            (-40.0, -40.0, 0.5, -1_074.930_332_128_500_4),
            (-40.0, -40.0, -0.5, -3_210.458_609_815_483_3),
            (-30.0, 5.0, -0.7, -709.881_563_193_317_2),
            (-20.0, -25.0, 0.99, -316.639_408_008_020_2),
            (10.0, -45.0, 0.3, -1_017.226_094_241_952_3),
            (-38.0, -1.0, 0.0, -728.398_237_663_786),
            (-12.0, -12.0, -0.9, -1_450.583_553_572_157_2),
            (-9.0, -9.0, -0.3, -122.627_825_537_555_42),
            (-5.0, -5.0, -0.95, -509.887_281_019_657_16),
            (-3.0, -3.0, -0.99, -911.288_590_460_712_1),
            (-50.0, -50.0, 0.999, -1_256.166_041_347_664_6),
            (-3.0, -4.0, -0.6, -36.783_050_182_361_23),
            (-8.0, 2.0, 0.2, -35.013_545_834_764_12),
        ];
        for (h, k, r, want) in cases {
            let got = ln_bvn_cdf(h, k, r).unwrap();
            assert!((got - want).abs() < 1e-10 * want.abs(), "({h},{k},{r}): {got} vs {want}");
        }
    }

    #[test]
    fn log_integral_agrees_with_direct_route_where_both_apply() {
        for &(h, k, r) in &[(-2.0, -1.0, 0.5), (-6.0, -6.0, 0.7), (0.3, -0.7, -0.6), (-4.0, 1.0, 0.95)] {
            let direct = bvn_cdf(h, k, r).unwrap().ln();
            let integral = ln_orthant_integral(h, k, r);
            assert!((direct - integral).abs() < 1e-11, "({h},{k},{r}) {direct} vs {integral}");
        }
    }

    #[test]
    fn cell_probs_closed_forms() {
        let t = cell_probs(BvnParams::new(0.0, 0.0, 0.0).unwrap()).unwrap();
        for p in t.probs() {
            assert_eq!(p, 0.25);
        }
        let t = cell_probs(BvnParams::new(0.0, 0.0, 0.5).unwrap()).unwrap();
        let [p00, p01, p10, p11] = t.probs();
        assert!((p00 - 1.0 / 3.0).abs() < 1e-15 && (p11 - 1.0 / 3.0).abs() < 1e-15);
        assert!((p01 - 1.0 / 6.0).abs() < 1e-15 && (p10 - 1.0 / 6.0).abs() < 1e-15);
    }

    #[test]
    fn bvn_params_validation() {
        assert!(BvnParams::new(f64::INFINITY, 0.0, 0.1).is_err());
        assert!(BvnParams::new(0.0, 0.0, -1.5).is_err());
        assert!(BvnParams::new(0.0, 0.0, -1.0).is_ok());
    }
}
