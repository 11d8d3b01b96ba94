//! Hyperspectral band selection with a dropout concrete autoencoder.
//!
//! Each spectral band gets a learnable keep-probability. During training every
//! pixel is gated by binary-concrete samples whose temperature is annealed
//! towards zero, a two-layer decoder reconstructs the full spectrum, and a
//! sparsity penalty on the gates pushes uninformative bands closed. The `k`
//! bands with the highest keep-probability are the selection; there is no
//! post-processing step.
//!
//! Modules:
//!
//! - [`numerics`]: dense matrices, fully connected layers, ADAM, LR milestones.
//! - [`concrete`]: binary-concrete / Gumbel-softmax sampling and annealing.
//! - [`model`]: the autoencoder, its loss and gradients, the training loop.
//! - [`data`]: the HSIC container, preprocessing, splits, synthetic scenes.
//! - [`eval`]: linear SVM, OA/AA/Kappa, band entropy, repeated evaluation.
//! - [`cli`]: the `dcae` command-line front end.

// Parameter checks are written `!(x > 0.0)` on purpose so that NaN fails them.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod concrete;
pub mod data;
pub mod error;
pub mod eval;
pub mod model;
pub mod numerics;

pub use error::{Error, Result};
