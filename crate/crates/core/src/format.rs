//! Locale-independent number formatting for CSV and CLI output.

/// Formats with up to 12 significant digits, trailing zeros trimmed.
/// Magnitudes outside `[1e-4, 1e12)` use exponent notation.
pub fn num(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return if x.is_nan() { "nan".into() } else if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    let mag = x.abs();
    if !(1e-4..1e12).contains(&mag) {
        let s = format!("{:.11e}", x);
        let (mant, exp) = s.split_once('e').unwrap_or((&s, "0"));
        return format!("{}e{}", trim(mant), exp);
    }
    let digits = (11 - mag.log10().floor() as i32).max(0) as usize;
    trim(&format!("{:.*}", digits, x)).to_string()
}

fn trim(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

#[cfg(test)]
mod tests {
    use super::num;

    #[test]
    fn examples() {
        assert_eq!(num(1.0), "1");
        assert_eq!(num(-0.5), "-0.5");
        assert_eq!(num(1.0 / 3.0), "0.333333333333");
        assert_eq!(num(123456.789), "123456.789");
        assert_eq!(num(1e-7), "1e-7");
        assert_eq!(num(2.5e13), "2.5e13");
        assert_eq!(num(0.1 + 0.2), "0.3");
    }
}
