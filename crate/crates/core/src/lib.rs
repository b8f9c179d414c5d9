//! Small-signal stability of power grids in the swing-equation effective
//! network model, and damping selection under parameter uncertainty.
//!
//! The pipeline runs case → power flow → effective network → Jacobian →
//! Lyapunov exponent. Damping plans are chosen by [`optimize`] and tested
//! by Monte Carlo in [`analysis`]. The crate is `no_std` with `alloc`.

#![no_std]
extern crate alloc;

pub mod analysis;
pub mod case;
pub mod eigen;
pub mod error;
pub mod exec;
pub mod network;
pub mod optimize;
pub mod powerflow;
pub mod rng;
pub mod stability;
pub mod uncertainty;

pub use error::{Error, Result};
pub use num_complex::Complex64;
