//! Numerical laboratory for kinetic Brownian motion on the unit tangent
//! bundle of a flat 2-torus.
//!
//! The generator `P = -gamma X + (gamma^2 / 2) Delta_V` is block diagonal over
//! horizontal Fourier modes `k`; each block is a tridiagonal matrix in the
//! vertical harmonics `e^{i m theta}`, truncated to `|m| <= M`. Everything in
//! this crate is built from those blocks.

pub mod assembly;
pub mod error;
pub mod linalg;
pub mod model;
pub mod sde;
pub mod semigroup;
pub mod spectra;

pub use nalgebra::Complex;

pub type C64 = Complex<f64>;
pub type CMat = nalgebra::DMatrix<C64>;
pub type CVec = nalgebra::DVector<C64>;

pub use error::{KbmError, Result};
pub use model::{HMode, SpectralWindow, TorusSpec};
