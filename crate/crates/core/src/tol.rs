//! Centralized numerical tolerances.
//!
//! Every hard-coded threshold in the crate routes through these constants
//! (or through a [`Tolerances`] value when a caller needs to override them).

/// Absolute tolerance for treating a floating-point value as zero.
pub const ABS: f64 = 1e-12;

/// Relative tolerance for comparisons between computed quantities.
pub const REL: f64 = 1e-9;

/// Overridable tolerance pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    pub abs: f64,
    pub rel: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances { abs: ABS, rel: REL }
    }
}

impl Tolerances {
    /// True when `a` and `b` agree within `rel` relative to their size,
    /// falling back to `abs` near zero.
    pub fn close(&self, a: f64, b: f64) -> bool {
        let scale = a.abs().max(b.abs());
        (a - b).abs() <= self.abs.max(self.rel * scale)
    }
}

/// Relative discrepancy |a - b| / max(|a|, |b|, floor).
pub fn rel_diff(a: f64, b: f64) -> f64 {
    let scale = a.abs().max(b.abs()).max(1e-300);
    (a - b).abs() / scale
}
