//! Text rendering shared by the CSV writers.

/// Formats a float with 17 significant digits, which round-trips every `f64`
/// exactly. Infinities are written as `inf` / `-inf`.
pub fn float(v: f64) -> String {
    if v.is_nan() {
        "nan".to_string()
    } else if v.is_infinite() {
        if v > 0.0 { "inf" } else { "-inf" }.to_string()
    } else {
        format!("{v:.16e}")
    }
}

/// Parses the output of [`float`].
pub fn parse_float(s: &str) -> Option<f64> {
    match s {
        "inf" => Some(f64::INFINITY),
        "-inf" => Some(f64::NEG_INFINITY),
        "nan" => Some(f64::NAN),
        _ => s.parse().ok(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn special_values() {
        assert_eq!(float(f64::NEG_INFINITY), "-inf");
        assert_eq!(float(f64::INFINITY), "inf");
        assert_eq!(float(0.5), "5.0000000000000000e-1");
        assert_eq!(parse_float("-inf"), Some(f64::NEG_INFINITY));
    }

    proptest! {
        #[test]
        fn round_trips(v in any::<f64>().prop_filter("finite", |v| v.is_finite())) {
            prop_assert_eq!(parse_float(&float(v)).unwrap().to_bits(), v.to_bits());
        }
    }
}
