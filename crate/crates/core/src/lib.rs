//! Numerical laboratory for the Hodgkin-Huxley neuron driven by a periodic
//! signal, deterministically or through a mean-reverting input diffusion.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod detsys;
pub mod diffusion;
pub mod error;
pub mod gating;
pub mod hormander;
pub mod jet;
pub mod rng;
pub mod signal;
pub mod stochsys;

pub use error::{Error, Result};
