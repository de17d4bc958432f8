//! Learning classifiers from noisily labeled data by coupling the observed
//! labels to the model's predictions with entropic optimal transport.
//!
//! The training objective replaces the usual sample-wise loss with a
//! transport cost between two views of a batch: the noisy empirical pairs
//! `(x_i, y~_i)` and the model pairs `(x_j, f(x_j))`. The optimal coupling
//! concentrates on pairs that are close both in feature space and in label
//! space, so samples whose labels disagree with their neighborhood stop
//! anchoring the fit and instead borrow mass, and effectively labels, from
//! samples that agree. The crate provides:
//!
//! - [`ot`]: exact assignment and log-domain Sinkhorn solvers, plus
//!   reverse-mode differentiation through a fixed number of Sinkhorn
//!   iterations.
//! - [`nn`]: a small dense network (ReLU, dropout, batch norm, softmax) with
//!   tape-based backpropagation and SGD with momentum.
//! - [`loss`]: cross-entropy plus noise-robust and noise-corrected losses.
//! - [`noise`]: label transition matrices and seeded label corruption.
//! - [`data`]: the two-moons generator, CSV io, stratified splits, and batch
//!   samplers.
//! - [`objective`] and [`train`]: the coupling loss, label propagation, the
//!   minibatch trainer, and the iterative full-batch refinement loop.
//! - [`config`], [`grid`], [`plot`], [`cli`]: a small experiment harness
//!   around the library.
//!
//! Start with the runnable examples (`cargo run --release --example
//! sinkhorn_transport`, `train_noisy_two_moons`, `toy_label_propagation`, …)
//! or the `cleot` binary (`cleot toy`, `cleot run`).

pub mod cli;
pub mod config;
pub mod data;
pub mod error;
pub mod grid;
pub(crate) mod linalg;
pub mod loss;
pub mod matrix;
pub mod nn;
pub mod noise;
pub mod objective;
pub mod ot;
pub mod plot;
pub mod rng;
pub mod train;

pub use error::{Error, Result};
pub use matrix::Matrix;
