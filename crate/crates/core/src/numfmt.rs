//! Fixed-precision float rendering for reproducible text outputs.

/// Round to `digits` significant digits.
pub fn round_sig(x: f64, digits: usize) -> f64 {
    if x == 0.0 || !x.is_finite() {
        return if x == 0.0 { 0.0 } else { x };
    }
    let s = format!("{:.*e}", digits.saturating_sub(1), x);
    let v: f64 = s.parse().unwrap_or(x);
    if v == 0.0 {
        0.0
    } else {
        v
    }
}

/// Six significant digits, shortest decimal form.
pub fn sig6(x: f64) -> String {
    let v = round_sig(x, 6);
    if v.is_nan() {
        "nan".to_string()
    } else {
        format!("{v}")
    }
}
