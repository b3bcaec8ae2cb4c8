//! Tomographic reconstruction of classical densities and quantum states.
//!
//! The crate covers the classical Radon pair (configuration and phase space),
//! Wigner transforms and Wigner tomography from rotated-quadrature
//! distributions, the rotated-quadrature kernels themselves, density-matrix
//! reconstruction through the displacement-operator expansion, and
//! mutually-unbiased-basis tomography of prime-dimension qudits.
//!
//! Units: ħ = 1 and all coordinates are dimensionless.

// `!(x > 0.0)` is used on purpose so NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod numerics;
pub mod radon;
pub mod fractional;
pub mod wigner;
pub mod qudit;
pub mod mub_continuous;
pub mod states;
pub mod io;
pub mod verify;

pub use error::{Result, TomoError};
