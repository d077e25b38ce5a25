//! Dense row-major matrices and seeded Gaussian sampling.

mod matrix;
mod rng;

pub use matrix::{elementwise, matmul, ElementwiseOp, Matrix};
pub use rng::{gaussian, RngStream};
