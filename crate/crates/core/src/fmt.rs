//! Float formatting for text artifacts.

/// Shortest decimal that parses back to the same `f64`. Plain notation for
/// magnitudes in `[1e-5, 1e16)` and zero, scientific otherwise.
pub fn format_f64(x: f64) -> String {
    let a = x.abs();
    if a == 0.0 || (1e-5..1e16).contains(&a) || !x.is_finite() {
        format!("{x}")
    } else {
        format!("{x:e}")
    }
}
