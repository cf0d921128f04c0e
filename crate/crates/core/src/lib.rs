//! Diffusion-driven actor-critic resource allocation for full-duplex
//! wireless networks.
//!
//! The crate is organized bottom-up:
//!
//! - [`numerics`] — dense real/complex linear algebra, feed-forward
//!   networks with reverse-mode gradients, and AdamW.
//! - [`gdm`] — denoising diffusion machinery: schedules, forward
//!   corruption, reverse chains, and the two training modes (critic-guided
//!   generation from pure noise, and corrupt-then-denoise data synthesis).
//! - [`env`] — the full-duplex base-station environment: steering vectors,
//!   line-of-sight channels, uplink/downlink SINR, sum rate, and the
//!   feasibility projection for beamformer/power actions.
//! - [`rewards`] — the five reward designs (raw, designed, MLP-shaped,
//!   diffusion-generated, designed + diffusion residual).
//! - [`agent`] — replay buffer, double critic, diffusion actor, the
//!   state-substitution controller, and the per-epoch training loop.
//! - [`harness`] — experiment configs, CSV metrics, sweeps, SVG plots,
//!   comparison reports, and checkpoints.

pub mod agent;
pub mod env;
pub mod gdm;
pub mod harness;
pub mod numerics;
pub mod rewards;
