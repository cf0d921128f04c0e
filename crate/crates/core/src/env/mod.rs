//! Full-duplex base-station environment: line-of-sight channels behind
//! uniform linear arrays, uplink/downlink rates under clutter interference,
//! the feasibility projection for beamformer/power actions, and the
//! random-walk mobility model that drives state transitions.

mod action;
mod channel;
mod codec;
mod config;
mod features;
mod rates;

pub use action::{
    project_action, project_encode, project_encode_vjp, NetworkAction, ProjectionCache,
};
pub use features::AlignmentFeatures;
pub use channel::{
    channels_from_positions, clutter_matrix, link_distance, path_amplitude, sample_channels,
    sample_positions, steering, ChannelState,
};
pub use codec::{encode_state, state_width};
pub use config::{noise_watts_from_dbm, EnvConfig};
pub use rates::{downlink_snr, power_residual, sum_rate, uplink_sinr, RateReport};

use crate::numerics::NumericsError;
use rand::Rng;
use rand_distr::StandardNormal;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum EnvError {
    #[error("invalid environment config: {0}")]
    InvalidConfig(String),
    #[error("raw action has width {got}, expected {expected}")]
    BadActionWidth { expected: usize, got: usize },
    #[error("action violates power constraints (residual {0:.3e}); project it first")]
    InfeasibleAction(f64),
    #[error("state/config dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error(transparent)]
    Numerics(#[from] NumericsError),
}

/// The environment: a config plus the current channel realization.
#[derive(Debug, Clone)]
pub struct WirelessEnv {
    cfg: EnvConfig,
    state: ChannelState,
}

impl WirelessEnv {
    pub fn new(cfg: EnvConfig, rng: &mut impl Rng) -> Result<Self, EnvError> {
        cfg.validate()?;
        let state = sample_channels(&cfg, rng);
        Ok(Self { cfg, state })
    }

    pub fn cfg(&self) -> &EnvConfig {
        &self.cfg
    }

    pub fn state(&self) -> &ChannelState {
        &self.state
    }

    /// Fresh uniform user placement (start of an episode).
    pub fn reset(&mut self, rng: &mut impl Rng) {
        self.state = sample_channels(&self.cfg, rng);
    }

    /// Evaluates the action on the current (pre-move) state, then moves the
    /// users and resamples channels deterministically from the new
    /// positions.
    pub fn step(&mut self, action: &NetworkAction, rng: &mut impl Rng) -> Result<RateReport, EnvError> {
        let (next, report) = env_step(&self.state, action, &self.cfg, rng)?;
        self.state = next;
        Ok(report)
    }
}

/// One environment transition. The rate report is computed on the pre-move
/// state; users then take a Gaussian random-walk step reflected into the
/// annulus `[min distance, cell radius]`, and channels are recomputed from
/// the new positions.
pub fn env_step(
    state: &ChannelState,
    action: &NetworkAction,
    cfg: &EnvConfig,
    rng: &mut impl Rng,
) -> Result<(ChannelState, RateReport), EnvError> {
    let report = sum_rate(state, action, cfg)?;
    let mut dl = state.dl_positions.clone();
    let mut ul = state.ul_positions.clone();
    move_users(&mut dl, cfg, rng);
    move_users(&mut ul, cfg, rng);
    let next = channels_from_positions(cfg, dl, ul);
    Ok((next, report))
}

/// Gaussian random-walk step with planar RMS displacement
/// `cfg.mobility_step_m`, reflected radially at the annulus boundaries.
fn move_users(positions: &mut [(f64, f64)], cfg: &EnvConfig, rng: &mut impl Rng) {
    // per-coordinate σ = step/√2 so the planar RMS displacement equals step
    let sigma = cfg.mobility_step_m / 2.0_f64.sqrt();
    for pos in positions.iter_mut() {
        pos.0 += sigma * rng.sample::<f64, _>(StandardNormal);
        pos.1 += sigma * rng.sample::<f64, _>(StandardNormal);
        let r = (pos.0 * pos.0 + pos.1 * pos.1).sqrt();
        let r_min = cfg.min_user_distance_m;
        let r_max = cfg.cell_radius_m;
        let reflected = if r > r_max {
            2.0 * r_max - r
        } else if r < r_min {
            2.0 * r_min - r
        } else {
            r
        };
        // A doubly-out-of-range reflection (possible only for absurd step
        // sizes) is clamped rather than re-reflected.
        let target = reflected.clamp(r_min, r_max);
        if r > 1e-12 {
            let scale = target / r;
            pos.0 *= scale;
            pos.1 *= scale;
        } else {
            *pos = (target, 0.0);
        }
    }
}
