//! Dense numeric substrate: real tensors, complex matrices, feed-forward
//! networks with reverse-mode gradients, and the AdamW optimizer.

mod complex;
mod gradcheck;
mod mlp;
mod tensor;

pub use complex::{herm_inner, mat_vec, quadratic_form, vec_norm, ComplexMatrix};
pub use gradcheck::{central_diff_grad, max_rel_err};
pub use mlp::{Activation, GradReport, Mlp, MlpTrace};
pub use tensor::RealTensor;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum NumericsError {
    #[error("shape mismatch: expected {expected}, got {got}")]
    ShapeMismatch { expected: String, got: String },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("backward called without a recorded forward pass")]
    NoForwardTrace,
    #[error("non-finite gradient, optimizer step aborted")]
    NonFiniteGradient,
    #[error("quadratic form has non-negligible imaginary part {0:.3e}")]
    NotHermitian(f64),
}
