//! Number formatting for text outputs.

/// Formats `x` with `digits` significant digits in the style of C's `%g`:
/// fixed notation for moderate exponents, scientific otherwise, trailing
/// zeros removed.
pub fn fmt_sig_digits(x: f64, digits: usize) -> String {
    let digits = digits.max(1);
    if x == 0.0 {
        return "0".to_string();
    }
    if !x.is_finite() {
        return format!("{x}");
    }
    // round first so that 9.9999999999 -> 10 picks the right exponent
    let sci = format!("{:.*e}", digits - 1, x);
    let (mantissa, exp) = sci.split_once('e').expect("scientific format has an exponent");
    let exp: i32 = exp.parse().expect("integer exponent");
    if exp < -5 || exp >= digits as i32 {
        format!("{}e{}", trim_zeros(mantissa), exp)
    } else {
        let decimals = (digits as i32 - 1 - exp).max(0) as usize;
        trim_zeros(&format!("{:.*}", decimals, x)).to_string()
    }
}

/// Ten significant digits.
pub fn fmt_sig(x: f64) -> String {
    fmt_sig_digits(x, 10)
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matches_printf_g() {
        let cases = [
            (-1.0140472901, "-1.01404729"),
            (0.0162886062, "0.0162886062"),
            (385.7551, "385.7551"),
            (1.0, "1"),
            (0.0, "0"),
            (1e-7, "1e-7"),
            (-2.5e12, "-2.5e12"),
            (9.99999999999, "10"),
            (123456.0, "123456"),
            (0.0001234, "0.0001234"),
        ];
        for (x, s) in cases {
            assert_eq!(fmt_sig(x), s, "{x}");
        }
        assert_eq!(fmt_sig_digits(3.14159, 3), "3.14");
    }

    #[test]
    fn round_trips_to_ten_digits() {
        for x in [1.234567890123, -0.000987654321987, 6.02214076e23, 2.0f64.sqrt()] {
            let y: f64 = fmt_sig(x).parse().unwrap();
            assert!(((y - x) / x).abs() <= 5e-10);
        }
    }
}
