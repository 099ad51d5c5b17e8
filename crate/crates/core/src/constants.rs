//! Physical constants, pinned in one place so every output is reproducible.

/// Speed of light in vacuum, m/s (exact SI value).
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Reduced Planck constant, J s (CODATA 2018).
pub const REDUCED_PLANCK: f64 = 1.054_571_817e-34;
