//! Number formatting shared by every output.

/// Significant digits in CSV and JSON output.
pub const SIGNIFICANT_DIGITS: usize = 12;

/// `printf("%.12g")`: fixed notation for exponents in `[-4, 12)`, scientific
/// otherwise, trailing zeros removed.
pub fn fmt_g12(x: f64) -> String {
    if x == 0.0 {
        return "0".to_string();
    }
    if !x.is_finite() {
        return x.to_string();
    }
    let sci = format!("{:.*e}", SIGNIFICANT_DIGITS - 1, x);
    let (mantissa, exponent) = sci
        .split_once('e')
        .expect("scientific format has an exponent");
    let exponent: i32 = exponent.parse().expect("integer exponent");
    if !(-4..SIGNIFICANT_DIGITS as i32).contains(&exponent) {
        let sign = if exponent < 0 { '-' } else { '+' };
        return format!("{}e{sign}{:02}", trim_zeros(mantissa), exponent.abs());
    }
    let decimals = (SIGNIFICANT_DIGITS as i32 - 1 - exponent) as usize;
    trim_zeros(&format!("{x:.decimals$}")).to_string()
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

/// `x` rounded to 12 significant digits, for JSON output.
pub fn round_sig(x: f64) -> f64 {
    if !x.is_finite() {
        return x;
    }
    fmt_g12(x).parse().expect("formatted float parses")
}
