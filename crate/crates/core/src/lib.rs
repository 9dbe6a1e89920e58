//! Numerical study of least-energy solutions of
//!     −Δu + λu = |u|^{p−1}u,  u = 0 on ∂A,
//! on annuli A ⊂ R^{2m} through an exact reduction to the weighted problem
//!     −Δv = (|v|^{p−1}v − λv)/(2|z|)
//! on an annulus D ⊂ R^{m+1}, with solvers for positive and sign-changing
//! minimizers, spike-concentration diagnostics across λ-sweeps, linearized
//! spectra, and Morse-index lower bounds built from spherical harmonics.

pub mod asymptotics;
pub mod config;
pub mod coords;
pub mod disc;
pub mod error;
pub mod grid;
pub mod linalg;
pub mod nehari;
pub mod params;
pub mod report;
pub mod runner;
pub mod spectral;

pub use error::{Error, Result};
pub use params::{ProblemParams, ReducedDomain};
