//! Shared numerical tolerances.

/// Feasibility of densities, memberships and constraint rows.
pub const FEASIBILITY: f64 = 1e-9;

/// Agreement required between reported quantities (interval endpoints,
/// allocation coordinates) before they are called equal.
pub const REPORTING: f64 = 1e-7;

/// Absolute tolerance scaled by the magnitude of the data it guards.
pub fn scaled(base: f64, magnitude: f64) -> f64 {
    base * magnitude.abs().max(1.0)
}

pub(crate) fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}
