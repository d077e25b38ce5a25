//! LSTM sequence models with the Brownian ReLU activation.
//!
//! Brownian ReLU is the identity on positive inputs. On non-positive inputs it
//! returns `-alpha * b`, where `b` is the Monte Carlo mean of `M` Brownian
//! samples `B(|x|) ~ N(0, |x|)`. `alpha` is a learnable slope shared by the
//! whole model.
//!
//! The crate is `no_std` (it needs `alloc`) and contains only pure numerical
//! code: dense matrices and a counter-based Gaussian sampler ([`numerics`]),
//! the activation family with exact backward passes ([`activation`]), a
//! single-layer LSTM with backpropagation through time ([`lstm`]), losses,
//! optimizers and the minibatch loop ([`training`]), dataset transforms and
//! synthetic generators ([`data`]), and evaluation metrics ([`metrics`]).
//!
//! File formats, the experiment runner and the CLI live in `brelu-lab`.
#![no_std]
#![forbid(unsafe_code)]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod activation;
pub mod data;
mod error;
pub mod lstm;
pub mod metrics;
pub mod numerics;
pub mod training;

pub use activation::{ActivationCache, ActivationKind, InputGradMode, Sampling};
pub use error::{Error, Result};
pub use lstm::{ForwardTrace, Head, LstmParams, ParamGrads};
pub use numerics::{Matrix, RngStream};
pub use training::{EvalNoise, Loss, Optimizer, TrainConfig, TrainHistory};
