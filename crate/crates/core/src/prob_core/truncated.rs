//! Truncated normal sampling.

use rand::Rng;
use rand_distr::{Distribution, Exp1, Open01};

use super::normal::{phi, quantile_unchecked};
use crate::error::{domain, Result};

/// Standardized truncation point beyond which rejection sampling replaces inversion.
const TAIL_SWITCH: f64 = 3.5;

/// One draw from `N(mean, sd^2)` restricted to `(lower, upper)`.
///
/// Either bound may be infinite. Intervals reaching no further than 3.5 sd
/// into a tail are sampled by CDF inversion; intervals lying entirely beyond
/// that use exponential-proposal rejection (uniform proposal when the
/// interval is narrow).
pub fn sample_truncated_normal<R: Rng + ?Sized>(
    mean: f64,
    sd: f64,
    lower: f64,
    upper: f64,
    rng: &mut R,
) -> Result<f64> {
    if !(sd > 0.0) || !sd.is_finite() {
        return Err(domain(format!("truncated normal needs sd > 0, got {sd}")));
    }
    if !mean.is_finite() {
        return Err(domain(format!("truncated normal needs a finite mean, got {mean}")));
    }
    if lower.is_nan() || upper.is_nan() || !(lower < upper) {
        return Err(domain(format!("empty truncation interval ({lower}, {upper})")));
    }
    Ok(sample_unchecked(mean, sd, lower, upper, rng))
}

pub(crate) fn sample_unchecked<R: Rng + ?Sized>(
    mean: f64,
    sd: f64,
    lower: f64,
    upper: f64,
    rng: &mut R,
) -> f64 {
    let a = (lower - mean) / sd;
    let b = (upper - mean) / sd;
    let z = if a >= TAIL_SWITCH {
        right_tail(a, b, rng)
    } else if b <= -TAIL_SWITCH {
        -right_tail(-b, -a, rng)
    } else {
        let u: f64 = Open01.sample(rng);
        if a > 0.0 {
            // upper half: invert survival probabilities to keep precision
            let (sa, sb) = (phi(-a), phi(-b));
            -quantile_unchecked(sb + u * (sa - sb))
        } else {
            let (fa, fb) = (phi(a), phi(b));
            quantile_unchecked(fa + u * (fb - fa))
        }
    };
    let mut x = mean + sd * z;
    if x <= lower {
        x = lower.next_up();
    }
    if x >= upper {
        x = upper.next_down();
    }
    x
}

/// Standard normal restricted to `(a, b)` with `a >= TAIL_SWITCH`.
fn right_tail<R: Rng + ?Sized>(a: f64, b: f64, rng: &mut R) -> f64 {
    if b - a < 1.0 / a {
        loop {
            let u: f64 = Open01.sample(rng);
            let x = a + u * (b - a);
            let v: f64 = Open01.sample(rng);
            if v.ln() <= 0.5 * (a * a - x * x) {
                return x;
            }
        }
    }
    let rate = 0.5 * (a + (a * a + 4.0).sqrt());
    loop {
        let e: f64 = Exp1.sample(rng);
        let x = a + e / rate;
        if x >= b {
            continue;
        }
        let v: f64 = Open01.sample(rng);
        if v.ln() <= -0.5 * (x - rate) * (x - rate) {
            return x;
        }
    }
}
