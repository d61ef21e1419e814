//! Locale-independent number formatting for every file the crate writes.

/// 17 significant digits in scientific notation, e.g. `-1.0000000000000001e-1`.
/// Round-trips any `f64` exactly.
pub fn num(x: f64) -> String {
    format!("{x:.16e}")
}

/// Comma-joined [`num`] values.
pub fn num_list(xs: &[f64]) -> String {
    xs.iter().map(|&x| num(x)).collect::<Vec<_>>().join(", ")
}
