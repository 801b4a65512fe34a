//! Physical constants and the unit conversions applied at ingestion.

use std::f64::consts::PI;

pub const HBAR: f64 = 1.054_571_817e-34;
pub const PLANCK: f64 = 6.626_070_15e-34;
pub const E_CHARGE: f64 = 1.602_176_634e-19;
/// Reduced flux quantum ħ/2e.
pub const PHI0_REDUCED: f64 = HBAR / (2.0 * E_CHARGE);

pub const FEMTO: f64 = 1e-15;
pub const PICO: f64 = 1e-12;
pub const MICRO: f64 = 1e-6;

/// Ordinary frequency in GHz to angular frequency in rad/s.
pub fn ghz_to_rad(f_ghz: f64) -> f64 {
    2.0 * PI * f_ghz * 1e9
}

pub fn rad_to_ghz(omega: f64) -> f64 {
    omega / (2.0 * PI * 1e9)
}

pub fn mhz_to_rad(f_mhz: f64) -> f64 {
    2.0 * PI * f_mhz * 1e6
}

pub fn rad_to_mhz(omega: f64) -> f64 {
    omega / (2.0 * PI * 1e6)
}

/// Energy quoted as E/h in GHz, returned in joules.
pub fn ghz_to_joule(e_ghz: f64) -> f64 {
    PLANCK * e_ghz * 1e9
}

/// Josephson inductance ħ²/(4e²E_J) = φ0²/E_J for an energy in joules.
pub fn josephson_inductance(e_j: f64) -> f64 {
    PHI0_REDUCED * PHI0_REDUCED / e_j
}
