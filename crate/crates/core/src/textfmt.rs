//! Canonical decimal formatting for data files.
//!
//! Every float written to a data file goes through [`sci`], which emits 17
//! significant digits in scientific notation. That many digits round-trips
//! any f64 exactly through `str::parse`, so write-then-read reproduces the
//! value bit for bit and identical runs produce byte-identical files.

/// Format a float with 17 significant digits, e.g. `7.5000000000000000e3`.
pub fn sci(x: f64) -> String {
    format!("{x:.16e}")
}

/// Join floats with single tabs using the canonical format.
pub fn sci_row(xs: &[f64]) -> String {
    xs.iter().map(|&x| sci(x)).collect::<Vec<_>>().join("\t")
}
