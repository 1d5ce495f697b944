//! Batch-effect calibration between two tabular batches.
//!
//! A residual generator is trained adversarially against a discriminator so
//! that generator-mapped source rows become indistinguishable from target
//! rows. The trained generator, run with frozen batch-norm statistics, is a
//! deterministic per-row calibration map. Residual batch effect is measured
//! with a multi-scale Gaussian-kernel MMD under a resampling protocol, and
//! visualised through a two-component PCA projection.
//!
//! Modules, bottom-up:
//!
//! - [`tensor`]: dense matrices and the seeded RNG.
//! - [`nn`]: linear, batch-norm and activation layers; generator and
//!   discriminator.
//! - [`optim`]: the Adam optimizer with bias correction.
//! - [`trainer`]: adversarial losses, the alternating training loop and
//!   calibration.
//! - [`metrics`]: Gaussian-kernel MMD, the resampling protocol, PCA.
//! - [`data`]: CSV I/O, standardization, synthetic batch pairs.
//! - [`checkpoint`]: versioned JSON checkpoints.

// `!(x > 0.0)` is used deliberately: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod checkpoint;
pub mod data;
pub mod error;
pub mod metrics;
pub mod nn;
pub mod optim;
pub mod tensor;
pub mod trainer;

pub use error::{Error, Result};
pub use tensor::{Matrix, Rng};
