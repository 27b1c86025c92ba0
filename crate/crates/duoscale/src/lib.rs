//! Double-scale asymptotics of spring–mass chains with a local strong cubic
//! nonlinearity.

// `!(x > 0.0)`-style guards are used throughout so that NaN inputs are
// rejected along with out-of-range ones.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
//!
//! The library covers the full verification pipeline for the first-order
//! multiple-scales approximation of
//! `M u'' + eps C u' + K u + Phi(u, eps) = eps^2 F cos(omega_tilde t)`
//! with `Phi` a local quadratic + strong cubic spring force:
//!
//! - [`model`]: chain systems, modal decomposition, the nonlinear force;
//! - [`eigen`]: dense generalized symmetric eigensolver;
//! - [`asymptotics`]: slow amplitude/phase flow and the free backbone;
//! - [`response`]: stationary forced responses, stability, frequency-response
//!   curves with the fold-back branch;
//! - [`integrate`]: theta-method and RK4 integration of the full equations,
//!   remainder extraction and the expansion-boundedness verifier;
//! - [`spectral`]: almost-periodic Fourier coefficients and peak detection;
//! - [`config`]: plain-text run configuration and CSV input parsing.

pub mod asymptotics;
pub mod config;
pub mod eigen;
pub mod error;
pub mod integrate;
pub mod model;
pub mod response;
pub mod spectral;

pub use error::{Error, Result};
