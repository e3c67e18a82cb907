//! Number formatting shared by the CSV writers.

/// `%g`-style rendering with `digits` significant digits, without exponent
/// for magnitudes in `[1e-4, 10^digits)`. Non-finite values render as
/// `inf`, `-inf` or `nan`.
pub fn format_sig(x: f64, digits: usize) -> String {
    if !x.is_finite() {
        return format!("{x}");
    }
    if x == 0.0 {
        return format!("{:.*}", digits.saturating_sub(1), 0.0);
    }
    let exp = x.abs().log10().floor() as i32;
    // Rounding can carry into the next decade (9.9999996 -> 10.0000).
    let rounded_exp = {
        let s = format!("{:.*e}", digits.saturating_sub(1), x);
        s.rsplit('e').next().and_then(|e| e.parse::<i32>().ok()).unwrap_or(exp)
    };
    if rounded_exp < -4 || rounded_exp >= digits as i32 {
        return format!("{:.*e}", digits.saturating_sub(1), x);
    }
    let decimals = (digits as i32 - 1 - rounded_exp).max(0) as usize;
    format!("{x:.decimals$}")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn significant_digits() {
        assert_eq!(format_sig(127.0, 6), "127.000");
        assert_eq!(format_sig(42.123456789, 6), "42.1235");
        assert_eq!(format_sig(65025.0, 6), "65025.0");
        assert_eq!(format_sig(0.5, 6), "0.500000");
        assert_eq!(format_sig(9.9999996, 6), "10.0000");
        assert_eq!(format_sig(0.0, 6), "0.00000");
        assert_eq!(format_sig(1234567.0, 6), "1.23457e6");
        assert_eq!(format_sig(f64::INFINITY, 6), "inf");
    }
}
