//! Dynamic iteration (waveform relaxation) for linear circuit DAEs with a
//! restricted additive Schwarz splitting and Aitken acceleration of the
//! interface iteration.
//!
//! The accelerated iteration recovers the monolithic backward-Euler solution
//! whether the plain iteration converges or diverges, because the interface
//! error obeys a fixed linear recursion that can be extrapolated exactly.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod aitken;
pub mod circuits;
pub mod cli;
pub mod dae;
pub mod error;
pub mod linalg;
pub mod nonlinear;
pub mod partition;
pub mod phasor;
pub mod ras;

pub use error::{Error, Result};
pub use nalgebra::{DMatrix, DVector};
