//! Rotatable-antenna uplink simulation and optimisation.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod baselines;
pub mod beamforming;
pub mod channel;
pub mod error;
pub mod geometry;
pub mod harness;
pub mod opt_ao;
pub mod opt_two_stage;
pub mod quadrature;
pub mod single_user;
pub mod solvers;
pub mod validation;

pub use error::{Error, Result};
