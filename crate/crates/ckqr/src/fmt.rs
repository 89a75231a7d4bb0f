//! Deterministic float formatting for machine-readable outputs:
//! 17 significant digits in JSON (lossless round trip), 10 in report CSVs.

/// Format with the given number of significant digits in scientific notation.
pub fn fmt_sig(x: f64, sig: usize) -> String {
    if x.is_nan() {
        return "nan".to_string();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf" } else { "-inf" }.to_string();
    }
    if x == 0.0 {
        return "0".to_string();
    }
    format!("{:.*e}", sig.saturating_sub(1), x)
}

#[cfg(test)]
mod tests {
    use super::fmt_sig;

    #[test]
    fn seventeen_digits_round_trip() {
        for &x in &[1.0 / 3.0, -2.5e-17, 0.1 + 0.2, 4.220e5, f64::MIN_POSITIVE] {
            let s = fmt_sig(x, 17);
            let back: f64 = s.parse().unwrap();
            assert_eq!(back.to_bits(), x.to_bits(), "{s}");
        }
        assert_eq!(fmt_sig(0.0, 17), "0");
        assert_eq!(fmt_sig(f64::NAN, 10), "nan");
    }

    #[test]
    fn ten_digit_form() {
        assert_eq!(fmt_sig(0.5, 10), "5.000000000e-1");
        assert_eq!(fmt_sig(-12.25, 10), "-1.225000000e1");
    }
}
