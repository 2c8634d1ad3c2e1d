//! Locale-independent number formatting for reports.

/// `x` with 12 significant digits, scientific notation.
pub fn sig12(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.11e}")
    } else {
        format!("{x}")
    }
}
