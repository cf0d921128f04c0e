//! Denoising-diffusion machinery: β/α/ᾱ schedules, forward corruption,
//! reverse denoising chains (plain and differentiable), the noise-prediction
//! loss, and the two operating modes used by the agent — critic-guided
//! generation from pure noise, and corrupt-then-denoise data synthesis.

mod chain;
mod predictor;
mod schedule;
mod training;

pub use chain::{
    chain_backward, forward_jump, forward_step, reverse_chain_from, reverse_step, sample_chain,
    sample_chain_traced, ChainTrace,
};
pub use predictor::{NoisePredictor, STEP_EMBED_WIDTH};
pub use schedule::{make_schedule, DiffusionSchedule};
pub use training::{
    denoise_loss, denoise_loss_at, denoise_train_step, mode1_policy_grad_step, mode2_generate,
    mode2_train_and_generate, CriticHook, Mode1Report, Mode2TrainConfig,
};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum GdmError {
    #[error("invalid schedule range: {0}")]
    InvalidSchedule(String),
    #[error("diffusion step {0} outside 1..={1}")]
    StepOutOfRange(usize, usize),
    #[error("width mismatch: {0}")]
    WidthMismatch(String),
    #[error("non-finite sample during diffusion chain")]
    Diverged,
    #[error(transparent)]
    Numerics(#[from] crate::numerics::NumericsError),
}
