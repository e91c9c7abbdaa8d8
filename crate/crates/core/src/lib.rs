//! Delay-tunable polarization entanglement from broadband type-II parametric
//! down-conversion.
//!
//! The crate follows a photon pair from its joint spectral amplitude through a
//! frequency- and polarization-dependent dichroic splitter to the two-qubit
//! polarization state left after post-selecting one photon per output path.
//! The coherence of that state, the complex 𝒟-parameter, depends on the
//! signal–idler delay τ and is computed by a frequency trace over the joint
//! spectrum. The other half of the crate handles the measurement side:
//! 36-projection coincidence tomography with accidental subtraction,
//! maximum-likelihood reconstruction, and purity, concurrence and fidelity
//! metrics.
//!
//! | module | contents |
//! |---|---|
//! | [`spectral`] | frequency grids, pump envelope, phase matching, JSA, band-pass |
//! | [`dichroic`] | logistic/tabulated transmission edges per polarization |
//! | [`jointstate`] | post-selected amplitudes, α/β, 𝒟(τ), delay sweeps, degradation fit |
//! | [`density`] | validated 4×4 density matrices and their text format |
//! | [`tomography`] | projectors, count model, accidentals, linear inversion, MLE |
//! | [`metrics`] | purity, concurrence, fidelity, 𝒟 extraction, CAR |
//! | [`config`] / [`pipeline`] | flat `key = value` run configuration and the CLI commands |
//!
//! Internally everything is SI with angular frequencies in rad/s. Wavelengths
//! (nm) and delays (fs) only appear at file and configuration boundaries.

pub mod config;
pub mod density;
pub mod dichroic;
pub mod error;
pub mod jointstate;
pub mod metrics;
pub mod pipeline;
pub mod spectral;
pub mod tomography;
pub mod units;

pub use num_complex::Complex64;

pub use density::DensityMatrix;
pub use error::{Error, Result};
