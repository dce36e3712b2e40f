//! Physical constants and unit conversions.

use std::f64::consts::{LN_2, PI};

/// Speed of light in vacuum (m/s), exact.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Planck constant (J·s), exact.
pub const PLANCK: f64 = 6.626_070_15e-34;

/// Earth gravitational parameter (m³/s²).
pub const GM_EARTH: f64 = 3.986_004_418e14;

/// Mean Earth radius (m).
pub const EARTH_RADIUS: f64 = 6.371e6;

/// Radians per arcsecond.
pub const ARCSEC: f64 = PI / (180.0 * 3600.0);

/// Picoseconds per second.
pub const PS_PER_S: f64 = 1e12;

/// Picoseconds per nanosecond.
pub const PS_PER_NS: f64 = 1e3;

/// Ratio FWHM / σ for a Gaussian, 2·sqrt(2 ln 2) ≈ 2.3548.
pub fn fwhm_per_sigma() -> f64 {
    2.0 * (2.0 * LN_2).sqrt()
}

/// Converts a Gaussian full width at half maximum into a standard deviation.
pub fn fwhm_to_sigma(fwhm: f64) -> f64 {
    fwhm / fwhm_per_sigma()
}
