//! Rotational coherence of He₂* excimers in superfluid helium.
//!
//! This crate models the full chain from a femtosecond "kick" pulse to the
//! measurable linear-dichroism (LD) beat signal and its decay in the helium
//! bath:
//!
//! * [`rotor`] — rigid-rotor quantum mechanics of the kicked molecule:
//!   basis construction, impulsive and finite-duration propagation,
//!   populations and ΔN = 2 coherences.
//! * [`fine`] — spin-rotation / spin-spin splitting of the rotational levels
//!   into J = {N, N±1} and the five beat frequencies of the (1,3) line.
//! * [`signal`] — forward model of the LD signal: multi-frequency beat
//!   synthesis with decay, Fourier analysis, sliding-window amplitude
//!   extraction and peak ratios.
//! * [`bath`] — He II property tables and the bath-coupling models:
//!   equilibrium kinematic decoherence, second-sound (non-equilibrium)
//!   decoherence and roton-mediated bimolecular annihilation.
//! * [`fit`] — bounded nonlinear least squares with adapters for the four
//!   model fits (spin-beat decay, kick-energy ratio, temperature
//!   decoherence, bimolecular density).
//! * [`config`], [`io`], [`cli`] — TOML run configuration, CSV input/output
//!   with provenance headers, and the command implementations behind the
//!   `he2rot` binary.
//!
//! Every computation is a pure function of its inputs; repeated runs with a
//! fixed seed produce byte-identical outputs. See the `examples/` directory
//! for one runnable program per capability.

pub mod bath;
pub mod cli;
pub mod config;
pub mod constants;
pub mod error;
pub mod fine;
pub mod fit;
pub mod io;
pub mod rotor;
pub mod signal;

pub use error::{Error, Result};
