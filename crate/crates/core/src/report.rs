//! Number formatting shared by CSV and JSON reports.

/// Rounds to `digits` significant decimal digits. Zero and non-finite values
/// pass through unchanged.
pub fn round_sig(x: f64, digits: usize) -> f64 {
    if x == 0.0 || !x.is_finite() || digits == 0 {
        return x;
    }
    format!("{:.*e}", digits - 1, x).parse().unwrap_or(x)
}

/// Report precision: 9 significant digits.
pub fn sig9(x: f64) -> f64 {
    round_sig(x, 9)
}

/// `sig9` rendered as text, for CSV cells.
pub fn fmt_sig9(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    format!("{:?}", sig9(x))
}
