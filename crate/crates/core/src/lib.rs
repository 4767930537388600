//! Moderately interacting particle systems driven by a common noise, and the
//! stochastic nonlinear Fokker-Planck equation they approximate.
//!
//! The particle side lives in [`particles`], the limit equation in [`spde`].
//! [`harness`] couples both on shared Brownian paths and estimates the
//! convergence rate of `sup_t ||rho^N_t - rho_t||_q` in `N`.

// `!(x > 0.0)` is used on purpose so that NaN fails validation
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod drift;
pub mod error;
pub mod harness;
pub mod initial;
pub mod io;
pub mod kernel;
pub mod metrics;
pub mod mollifier;
pub mod particles;
pub mod quadrature;
pub mod rng;
pub mod spde;
pub mod torus;

pub use error::{LabError, Result};
