//! Complex higher-order SVD analysis of multivariate time-series cohorts.
//!
//! The crate is `no_std` (it needs `alloc`) and carries only pure numerical
//! code: dense complex tensors, a Jacobi-based complex SVD, analytic-signal
//! complexification, truncated HOSVD, phase-feature projection with optional
//! subject-factor conjugate rotation, Fisher ranking, two-class LDA with
//! stratified cross-validation, and a synthetic cohort generator with planted
//! low-rank structure. File formats, ingestion from disk and the command line
//! live in the companion `chosvd-cli` crate.
//!
//! Tensors are indexed `(variable, time, subject)`. Storage is one contiguous
//! buffer with the first index varying fastest.

// Comparisons like `!(x > 0.0)` are negated on purpose so that NaN fails them.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod classify;
pub mod cohort;
mod error;
pub mod features;
pub mod hosvd;
pub mod linalg;
pub mod matrix;
pub mod pipeline;
mod rng;
pub mod signal;
pub mod synth;
pub mod tensor;

pub use error::{Error, ErrorKind, Result};
pub use matrix::{ComplexMatrix, RealMatrix};
pub use tensor::ComplexTensor3;

/// Complex scalar used throughout the crate.
pub type C64 = num_complex::Complex64;
