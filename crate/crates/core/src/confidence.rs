//! Anytime confidence radius shared by every policy.
//!
//! The radius for a statistic averaged over `pulls` samples at round `t` is
//!
//! ```text
//! radius(t, pulls) = sqrt( ln(4 * N * M * t^4 / delta) / (2 * pulls) )
//! ```
//!
//! The `t^4` factor makes the interval *anytime*: a union bound over all
//! rounds and all `N * M` attribute streams leaves a per-event failure
//! probability of `delta / (2 N M t^3)`, whose sum over `t >= 2` stays below
//! `delta / 4`. Every policy in this crate prices its intervals through this
//! one function so comparisons between policies are radius-for-radius fair.

/// The log term `ln(4 N M t^4 / delta)`, clamped at zero.
///
/// Split out so per-round callers can pay the logarithm once and derive the
/// radii of many pull counts from it. Computed as
/// `ln(4NM/delta) + 4 ln(t)` to stay finite for astronomically large `t`.
#[must_use]
pub fn log_term(t: u64, delta: f64, n_arms: usize, n_attrs: usize) -> f64 {
    debug_assert!(t >= 1, "rounds are 1-based");
    debug_assert!(delta > 0.0, "confidence level must be positive");
    let base = (4.0 * n_arms as f64 * n_attrs as f64 / delta).ln();
    (base + 4.0 * (t as f64).ln()).max(0.0)
}

/// Radius from a precomputed [`log_term`] and a pull count.
#[must_use]
pub fn radius_from_log_term(log_term: f64, pulls: u64) -> f64 {
    debug_assert!(pulls >= 1, "radius undefined before the first pull");
    (log_term / (2.0 * pulls as f64)).sqrt()
}

/// The anytime confidence radius `sqrt(ln(4·N·M·t⁴/δ) / (2·pulls))`.
///
/// `t` is the current round index (not the pull count); `pulls` is how many
/// samples back the estimate being bracketed.
///
/// # Examples
///
/// ```
/// use grouped_bai::confidence_radius;
///
/// // Doubling the pull count exactly halves the squared radius.
/// let a = confidence_radius(10, 8, 0.1, 5, 5);
/// let b = confidence_radius(10, 16, 0.1, 5, 5);
/// assert!((b * b - a * a / 2.0).abs() < 1e-15);
/// ```
#[must_use]
pub fn confidence_radius(t: u64, pulls: u64, delta: f64, n_arms: usize, n_attrs: usize) -> f64 {
    radius_from_log_term(log_term(t, delta, n_arms, n_attrs), pulls)
}
