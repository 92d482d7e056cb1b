//! Centralized numeric tolerances.
//!
//! Every floating-point threshold used by the crate and its test suites is
//! defined here; no module carries its own magic epsilon.

/// Tolerance for quantities that are exact up to f64 rounding: transform
/// unitarity, inverse-identity, spectral-comb support, marginal equivalence,
/// and exact total-variation distances.
pub const AMP_EPSILON: f64 = 1e-12;

/// Tolerance on probability normalization (sums of up to ~2^20 squared
/// amplitudes).
pub const PROB_EPSILON: f64 = 1e-12;

/// Total-variation budget for empirical histograms of ~10^4 samples.
pub const TV_STATISTICAL: f64 = 0.05;
