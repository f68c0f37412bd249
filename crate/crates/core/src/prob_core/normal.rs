//! Univariate standard normal kernels.

use std::f64::consts::{FRAC_1_SQRT_2, PI, SQRT_2};

use statrs::function::erf::erfc_inv;

use crate::error::{domain, Result};

/// ln(sqrt(2*pi))
pub(crate) const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

/// Standard normal CDF with absolute error below 1e-15.
///
/// Non-finite arguments are rejected; use the crate-internal [`phi`] when the
/// infinities are meaningful sentinels.
pub fn std_normal_cdf(x: f64) -> Result<f64> {
    if !x.is_finite() {
        return Err(domain(format!("std_normal_cdf requires a finite argument, got {x}")));
    }
    Ok(phi(x))
}

/// Standard normal quantile, polished with Halley steps against [`std_normal_cdf`].
pub fn std_normal_quantile(p: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(domain(format!("std_normal_quantile requires 0 < p < 1, got {p}")));
    }
    Ok(quantile_unchecked(p))
}

pub fn std_normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x - LN_SQRT_2PI).exp()
}

pub fn ln_std_normal_pdf(x: f64) -> f64 {
    -0.5 * x * x - LN_SQRT_2PI
}

/// `ln Phi(x)`, finite for every finite `x` (no underflow in the far left tail).
pub fn ln_std_normal_cdf(x: f64) -> f64 {
    if x.is_nan() {
        return f64::NAN;
    }
    if x == f64::INFINITY {
        return 0.0;
    }
    if x == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    if x < -ERF_SWITCH * SQRT_2 {
        (0.5 * erfcx_large(-x * FRAC_1_SQRT_2)).ln() - 0.5 * x * x
    } else if x > 0.0 {
        (-phi(-x)).ln_1p()
    } else {
        phi(x).ln()
    }
}

/// Inverse Mills ratio `phi(x)/Phi(x)`, stable for very negative `x`.
pub(crate) fn inverse_mills(x: f64) -> f64 {
    if x > -30.0 {
        std_normal_pdf(x) / phi(x)
    } else {
        (ln_std_normal_pdf(x) - ln_std_normal_cdf(x)).exp()
    }
}

/// Standard normal CDF accepting the infinities.
pub(crate) fn phi(x: f64) -> f64 {
    if x.is_nan() {
        return f64::NAN;
    }
    if x == f64::INFINITY {
        return 1.0;
    }
    if x == f64::NEG_INFINITY {
        return 0.0;
    }
    if x.abs() <= ERF_SWITCH * SQRT_2 {
        0.5 + 0.5 * erf_small(x * FRAC_1_SQRT_2)
    } else if x < 0.0 {
        0.5 * erfcx_large(-x * FRAC_1_SQRT_2) * exp_neg_half_sq(x)
    } else {
        1.0 - 0.5 * erfcx_large(x * FRAC_1_SQRT_2) * exp_neg_half_sq(x)
    }
}

// W. J. Cody's rational Chebyshev approximations for erf/erfc (CALERF).
const ERF_SWITCH: f64 = 0.46875;
const ERF_A: [f64; 5] = [
    3.161_123_743_870_565_6,
    113.864_154_151_050_16,
    377.485_237_685_302_0,
    3_209.377_589_138_469_5,
    0.185_777_706_184_603_15,
];
const ERF_B: [f64; 4] = [
    23.601_290_952_344_122,
    244.024_637_934_444_17,
    1_282.616_526_077_372_3,
    2_844.236_833_439_170_6,
];
const ERFC_C: [f64; 9] = [
    0.564_188_496_988_670_1,
    8.883_149_794_388_376,
    66.119_190_637_141_63,
    298.635_138_197_400_1,
    881.952_221_241_769_1,
    1_712.047_612_634_070_6,
    2_051.078_377_826_071_5,
    1_230.339_354_797_997_2,
    2.153_115_354_744_038_5e-8,
];
const ERFC_D: [f64; 8] = [
    15.744_926_110_709_835,
    117.693_950_891_312_5,
    537.181_101_862_009_9,
    1_621.389_574_566_690_2,
    3_290.799_235_733_459_6,
    4_362.619_090_143_247,
    3_439.367_674_143_721_6,
    1_230.339_354_803_749_4,
];
const ERFC_P: [f64; 6] = [
    0.305_326_634_961_232_34,
    0.360_344_899_949_804_44,
    0.125_781_726_111_229_25,
    0.016_083_785_148_742_277,
    6.587_491_615_298_378e-4,
    0.016_315_387_137_302_098,
];
const ERFC_Q: [f64; 5] = [
    2.568_520_192_289_822,
    1.872_952_849_923_467_3,
    0.527_905_102_951_428_4,
    0.060_518_341_312_441_32,
    0.002_335_204_976_268_691_8,
];
const FRAC_1_SQRT_PI: f64 = 0.564_189_583_547_756_3;

/// erf(x) for |x| <= 0.46875.
fn erf_small(x: f64) -> f64 {
    let ysq = x * x;
    let mut num = ERF_A[4] * ysq;
    let mut den = ysq;
    for i in 0..3 {
        num = (num + ERF_A[i]) * ysq;
        den = (den + ERF_B[i]) * ysq;
    }
    x * (num + ERF_A[3]) / (den + ERF_B[3])
}

/// Scaled complement `exp(y^2) erfc(y)` for y > 0.46875.
fn erfcx_large(y: f64) -> f64 {
    if y <= 4.0 {
        let mut num = ERFC_C[8] * y;
        let mut den = y;
        for i in 0..7 {
            num = (num + ERFC_C[i]) * y;
            den = (den + ERFC_D[i]) * y;
        }
        (num + ERFC_C[7]) / (den + ERFC_D[7])
    } else {
        let ysq = 1.0 / (y * y);
        let mut num = ERFC_P[5] * ysq;
        let mut den = ysq;
        for i in 0..4 {
            num = (num + ERFC_P[i]) * ysq;
            den = (den + ERFC_Q[i]) * ysq;
        }
        let r = ysq * (num + ERFC_P[4]) / (den + ERFC_Q[4]);
        (FRAC_1_SQRT_PI - r) / y
    }
}

/// exp(-x^2/2) without the cancellation error of squaring a rounded argument.
fn exp_neg_half_sq(x: f64) -> f64 {
    let xs = (x * 16.0).trunc() / 16.0;
    let del = (x - xs) * (x + xs);
    (-0.5 * xs * xs).exp() * (-0.5 * del).exp()
}

pub(crate) fn quantile_unchecked(p: f64) -> f64 {
    if p == 0.5 {
        return 0.0;
    }
    // Work in the lower half so the tail keeps full relative precision.
    let (q, sign) = if p < 0.5 { (p, -1.0) } else { (1.0 - p, 1.0) };
    let mut x = -SQRT_2 * erfc_inv(2.0 * q);
    for _ in 0..2 {
        let err = phi(x) - q;
        let u = err * (2.0 * PI).sqrt() * (0.5 * x * x).exp();
        if !u.is_finite() || u == 0.0 {
            break;
        }
        x -= u / (1.0 + 0.5 * x * u);
    }
    if sign > 0.0 {
        -x
    } else {
        x
    }
}
