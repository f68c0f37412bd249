//! Text form of floats for output files.

/// Shortest decimal that parses back to the same `f64`; scientific
/// notation outside `[1e-5, 1e16)`.
pub fn format_float(v: f64) -> String {
    let a = v.abs();
    if v == 0.0 || !v.is_finite() || (1e-5..1e16).contains(&a) {
        format!("{v}")
    } else {
        format!("{v:e}")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trips() {
        for v in [0.0, -0.0, 1.0, 0.1, 1e-300, -2.5e-7, 1e16, 123456.789, f64::MIN_POSITIVE, 5e-324] {
            let s = format_float(v);
            assert_eq!(s.parse::<f64>().unwrap().to_bits(), v.to_bits(), "{s}");
        }
        assert_eq!(format_float(1e-300), "1e-300");
        assert_eq!(format_float(0.25), "0.25");
    }
}
