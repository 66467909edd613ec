//! Physical constants (CODATA) used as defaults throughout the crate.
//!
//! Trap layouts carry their own ion mass and charge so other species can be
//! configured without touching these.

/// Mass of a single ⁴⁰Ca⁺ ion [kg].
pub const CA40_MASS: f64 = 6.642156e-26;

/// Elementary charge [C].
pub const ELEMENTARY_CHARGE: f64 = 1.602176634e-19;

/// Reduced Planck constant [J·s].
pub const HBAR: f64 = 1.054571817e-34;
