//! Physical constants and the wavelength/frequency conversions used at I/O
//! boundaries.

use std::f64::consts::TAU;

/// Speed of light in vacuum, m/s (exact).
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

pub const NANOMETRE: f64 = 1e-9;
pub const FEMTOSECOND: f64 = 1e-15;

/// ω = 2πc/λ.
pub fn wavelength_to_omega(wavelength: f64) -> f64 {
    TAU * SPEED_OF_LIGHT / wavelength
}

/// λ = 2πc/ω.
pub fn omega_to_wavelength(omega: f64) -> f64 {
    TAU * SPEED_OF_LIGHT / omega
}

/// Converts a small wavelength interval at `center` into angular frequency
/// with the local Jacobian |dω/dλ| = 2πc/λ².
pub fn bandwidth_to_omega(center: f64, width: f64) -> f64 {
    TAU * SPEED_OF_LIGHT * width / (center * center)
}
