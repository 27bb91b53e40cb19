//! Physical constants (SI units).

/// Reduced Planck constant, J·s (CODATA 2018 exact value).
pub const HBAR: f64 = 1.054_571_817e-34;

/// Atomic mass unit, kg.
pub const AMU: f64 = 1.660_539_066_60e-27;

/// Mass of a single ⁸⁸Sr⁺ ion, kg.
pub const SR88_MASS: f64 = 87.905_612_2 * AMU;
