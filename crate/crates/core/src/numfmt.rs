//! Text rendering of `f64` values at full precision.

/// Formats `v` so that parsing the text yields exactly `v` again.
///
/// Integral values below 2^53 are written without a fractional part; every
/// other finite value is written with 17 significant digits in exponent form.
pub fn fmt_f64(v: f64) -> String {
    if v.is_finite() && v.fract() == 0.0 && v.abs() < 9_007_199_254_740_992.0 {
        if v == 0.0 {
            // drop the sign of -0.0
            return "0".to_string();
        }
        format!("{v:.0}")
    } else {
        format!("{v:.16e}")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn integral_and_fractional() {
        assert_eq!(fmt_f64(5.0), "5");
        assert_eq!(fmt_f64(-0.0), "0");
        assert_eq!(fmt_f64(0.5), "5.0000000000000000e-1");
        let third = 1.0 / 3.0;
        assert_eq!(fmt_f64(third).parse::<f64>().unwrap(), third);
    }
}
