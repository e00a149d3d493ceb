//! Numerical models for electromagnetically-induced-transparency cooling of a
//! single atom in an optical tweezer.
//!
//! All frequencies are angular (rad/s) and all quantities SI unless a
//! function name says otherwise. Conversion from laboratory units happens
//! at the I/O boundary (see [`types::from_mhz`] and friends).

pub mod bloch;
pub mod cooling;
pub mod error;
pub mod fit;
pub mod rng;
pub mod spectra;
pub mod thermometry;
pub mod trap;
pub mod types;

pub use error::{Error, Result};
pub use types::{LambdaParams, PhysicalConstants, Spectrum, SpectrumKind, SpectrumPoint, TWO_PI};
