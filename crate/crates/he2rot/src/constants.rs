//! Physical constants and unit conversions (SI anchors, domain units elsewhere).
//!
//! Domain units used throughout the crate: time in ps (fs for pulse
//! durations), frequencies in THz (GHz for fine structure), energies as
//! frequencies E/h, temperatures in K, lengths in nm (Å² for cross-sections),
//! number densities in cm⁻³.

/// Reduced Planck constant, J·s.
pub const HBAR_J_S: f64 = 1.054_571_817e-34;

/// Speed of light, m/s.
pub const SPEED_OF_LIGHT_M_S: f64 = 2.997_924_58e8;

/// Å³ → m³ (polarizability volume).
pub const A3_TO_M3: f64 = 1.0e-30;

/// μJ → J.
pub const UJ_TO_J: f64 = 1.0e-6;

/// W/cm² → W/m².
pub const W_CM2_TO_W_M2: f64 = 1.0e4;

/// For a Gaussian intensity envelope of given FWHM, ∫I(t)dt = I_peak · FWHM · this.
pub const GAUSSIAN_FWHM_TO_EFFECTIVE: f64 = 1.064_467_019_431_226; // sqrt(pi / (4 ln 2))
