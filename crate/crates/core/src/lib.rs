//! Ground-to-satellite free-space QKD link simulation.
//!
//! A Gaussian beam is propagated with the angular spectrum method through Von Kármán
//! phase screens whose strength follows the Hufnagel–Valley Cn² profile. The aperture-coupled
//! transmittance, averaged over Monte Carlo realizations and combined with static
//! attenuation, drives a decoy-state BB84 gain / QBER / key-rate model.

// `!(x > 0.0)` style guards are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod atmosphere;
pub mod dump;
pub mod error;
pub mod fft;
pub mod field;
pub mod linkbudget;
pub mod propagation;
pub mod qkd;
pub mod quad;
pub mod scenario;
pub mod seed;
pub mod sweep;
pub mod turbulence;

pub use error::{Error, Result};
