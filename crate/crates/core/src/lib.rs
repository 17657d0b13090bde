//! Pseudo-spectral laboratory for the gravity–capillary water-wave system in
//! Zakharov/Craig–Sulem form, with the paradifferential tools used to analyze it.
//!
//! Layers, bottom up: [`spectral`] (periodic grids, multipliers), [`lp`]
//! (Littlewood–Paley blocks, paraproducts), [`paradiff`] (symbols and their
//! quantization), [`dn`] (Dirichlet–Neumann operator on a straightened strip),
//! [`waterwaves`] (evolution), [`symmetrizer`] and [`diagnostics`].

pub mod diagnostics;
pub mod dn;
pub mod error;
mod fft;
pub mod lp;
pub mod paradiff;
pub mod spectral;
pub mod symmetrizer;
pub mod waterwaves;

pub use error::{Error, Result};
pub use spectral::{Field, Grid, Multiplier, C64};
