//! The learning agent: replay storage, double critic with target networks,
//! the diffusion (or plain MLP) actor, the state-substitution controller,
//! and the per-epoch training loop that ties them together.

mod actor;
mod critic;
mod d2rl;
mod explore;
mod replay;

pub use actor::{actor_update, policy_actions_encoded, select_action, Actor, ActorUpdate};
pub use critic::{CriticPair, TargetAudit};
pub use d2rl::{ActorKind, Agent, AgentConfig, EpochStats};
pub use explore::{StateExplorationConfig, StateExplorer};
pub use replay::{ReplayBuffer, Transition};

use crate::env::EnvError;
use crate::gdm::GdmError;
use crate::numerics::NumericsError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum AgentError {
    #[error("configuration mismatch: {0}")]
    Mismatch(String),
    #[error(transparent)]
    Numerics(#[from] NumericsError),
    #[error(transparent)]
    Gdm(#[from] GdmError),
    #[error(transparent)]
    Env(#[from] EnvError),
}
