//! Redfield relaxometry for molecular spin qubits.
//!
//! The crate predicts relaxation (T1) and dephasing (T2) times of an electron
//! spin 1/2 coupled to an on-site nuclear spin. The bath is described by a
//! hybrid spectral density: a spin-lattice part built from g-tensor
//! fluctuation spectra and a Lorentzian magnetic-noise part.
//!
//! Module map:
//!
//! * [`units`] and [`operators`]: constants, unit conversion, spin matrices.
//! * [`hamiltonian`]: the static spin Hamiltonian and its eigensystem.
//! * [`trajectory`] and [`acf`]: g-tensor time series, windowed ACFs,
//!   fluctuation spectra and temperature exponents.
//! * [`spectral`]: the hybrid bath spectral density.
//! * [`redfield`]: Redfield tensor assembly and propagation.
//! * [`relaxometry`]: T1/T2 protocol, decay fits and sweeps.

pub mod acf;
pub mod error;
pub mod fit;
pub mod hamiltonian;
pub mod linalg;
pub mod operators;
mod parallel;
pub mod redfield;
pub mod relaxometry;
pub mod spectral;
pub mod trajectory;
pub mod units;

#[cfg(feature = "cli")]
pub mod cli;

pub use error::{Error, Result};

/// Complex scalar used throughout.
pub type C64 = num_complex::Complex64;
/// Dense complex matrix.
pub type CMatrix = nalgebra::DMatrix<C64>;
