use super::HarnessError;
use crate::agent::{ActorKind, AgentConfig, StateExplorationConfig};
use crate::env::{noise_watts_from_dbm, EnvConfig};
use crate::rewards::RewardVariant;
use std::path::Path;

/// Scale profile: the desk profile keeps the reference dimensions and
/// hyperparameters; the tiny profile shrinks the scenario and networks for
/// fast runs and CI.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Profile {
    Desk,
    Tiny,
}

impl Profile {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "desk" => Some(Self::Desk),
            "tiny" => Some(Self::Tiny),
            _ => None,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::Desk => "desk",
            Self::Tiny => "tiny",
        }
    }
}

/// A full experiment description: scenario, agent hyperparameters, and run
/// controls.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub env: EnvConfig,
    pub agent: AgentConfig,
    pub epochs: usize,
    pub seed: u64,
    /// Trailing window (epochs) for the moving-average reward and the
    /// convergence detector.
    pub ma_window: usize,
}

impl ExperimentConfig {
    pub fn for_profile(profile: Profile) -> Self {
        match profile {
            Profile::Desk => Self {
                env: EnvConfig::default(),
                agent: AgentConfig::default(),
                epochs: 3_000,
                seed: 0,
                ma_window: 100,
            },
            Profile::Tiny => Self {
                env: EnvConfig {
                    downlink_users: 2,
                    uplink_users: 2,
                    tx_antennas: 3,
                    rx_antennas: 3,
                    steps_per_epoch: 96,
                    episode_length: 1,
                    ..EnvConfig::default()
                },
                agent: AgentConfig {
                    hidden_width: 64,
                    batch_size: 64,
                    updates_per_epoch: 10,
                    lr_actor: 1e-3,
                    lr_critic: 3e-3,
                    lr_reward_net: 1e-3,
                    lr_state_net: 1e-3,
                    shaper_hidden_width: 32,
                    ..AgentConfig::default()
                },
                epochs: 500,
                seed: 0,
                ma_window: 50,
            },
        }
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        self.env.validate().map_err(|e| HarnessError::Config {
            key: "env".into(),
            reason: e.to_string(),
        })?;
        let positive = [
            ("lr_actor", self.agent.lr_actor),
            ("lr_critic", self.agent.lr_critic),
            ("lr_state_net", self.agent.lr_state_net),
            ("lr_reward_net", self.agent.lr_reward_net),
            ("tau", self.agent.tau),
            ("gamma", self.agent.gamma),
        ];
        for (key, v) in positive {
            if !(v > 0.0) || !v.is_finite() {
                return Err(HarnessError::Config {
                    key: key.into(),
                    reason: format!("must be > 0, got {v}"),
                });
            }
        }
        if self.agent.gamma > 1.0 {
            return Err(HarnessError::Config {
                key: "gamma".into(),
                reason: "must be in (0, 1]".into(),
            });
        }
        if self.epochs == 0 || self.agent.batch_size == 0 || self.ma_window == 0 {
            return Err(HarnessError::Config {
                key: "epochs/batch_size/ma_window".into(),
                reason: "must be >= 1".into(),
            });
        }
        if let Some(ex) = &self.agent.state_exploration {
            ex.validate().map_err(|e| HarnessError::Config {
                key: "state_exploration".into(),
                reason: e.to_string(),
            })?;
        }
        Ok(())
    }

    /// Applies one `key = value` override.
    fn apply(&mut self, key: &str, value: &str) -> Result<(), HarnessError> {
        let bad = |reason: &str| HarnessError::Config {
            key: key.to_string(),
            reason: reason.to_string(),
        };
        macro_rules! num {
            ($t:ty) => {
                value
                    .parse::<$t>()
                    .map_err(|e| bad(&format!("{value:?} is not a valid number: {e}")))?
            };
        }
        match key {
            // environment
            "cell_radius_m" => self.env.cell_radius_m = num!(f64),
            "bs_height_m" => self.env.bs_height_m = num!(f64),
            "downlink_users" => self.env.downlink_users = num!(usize),
            "uplink_users" => self.env.uplink_users = num!(usize),
            "tx_antennas" => self.env.tx_antennas = num!(usize),
            "rx_antennas" => self.env.rx_antennas = num!(usize),
            "pathloss_exponent" => self.env.pathloss_exponent = num!(f64),
            "ref_gain" => self.env.ref_gain = num!(f64),
            "noise_dl_dbm" => self.env.noise_dl_w = noise_watts_from_dbm(num!(f64)),
            "noise_ul_dbm" => self.env.noise_ul_w = noise_watts_from_dbm(num!(f64)),
            "max_bs_power_w" => self.env.max_bs_power_w = num!(f64),
            "max_ul_power_w" => self.env.max_ul_power_w = num!(f64),
            "interferer_angles_deg" => {
                let mut angles = Vec::new();
                for part in value.split(',').map(str::trim).filter(|p| !p.is_empty()) {
                    angles.push(
                        part.parse::<f64>()
                            .map_err(|e| bad(&format!("bad angle {part:?}: {e}")))?,
                    );
                }
                self.env.interferer_angles_deg = angles;
            }
            "interferer_gain_db" => self.env.interferer_gain_db = num!(f64),
            "steps_per_epoch" => self.env.steps_per_epoch = num!(usize),
            "episode_length" => self.env.episode_length = num!(usize),
            "mobility_step_m" => self.env.mobility_step_m = num!(f64),
            "min_user_distance_m" => self.env.min_user_distance_m = num!(f64),
            // agent
            "actor" => {
                self.agent.actor_kind =
                    ActorKind::parse(value).ok_or_else(|| bad("expected gdm or mlp"))?
            }
            "hidden_width" => self.agent.hidden_width = num!(usize),
            "actor_hidden_layers" => self.agent.actor_hidden_layers = num!(usize),
            "state_net_hidden_layers" => self.agent.state_net_hidden_layers = num!(usize),
            "reward_net_hidden_layers" => self.agent.reward_net_hidden_layers = num!(usize),
            "critic_hidden_layers" => self.agent.critic_hidden_layers = num!(usize),
            "lr_actor" => self.agent.lr_actor = num!(f64),
            "lr_critic" => self.agent.lr_critic = num!(f64),
            "lr_state_net" => self.agent.lr_state_net = num!(f64),
            "lr_reward_net" => self.agent.lr_reward_net = num!(f64),
            "weight_decay" => self.agent.weight_decay = num!(f64),
            "tau" => self.agent.tau = num!(f64),
            "gamma" => self.agent.gamma = num!(f64),
            "diffusion_steps" => self.agent.diffusion_steps = num!(usize),
            "beta_min" => self.agent.beta_min = num!(f64),
            "beta_max" => self.agent.beta_max = num!(f64),
            "batch_size" => self.agent.batch_size = num!(usize),
            "buffer_capacity" => self.agent.buffer_capacity = num!(usize),
            "epsilon_greedy" => self.agent.epsilon_greedy = num!(f64),
            "updates_per_epoch" => self.agent.updates_per_epoch = num!(usize),
            "mlp_actor_noise" => self.agent.mlp_actor_noise = num!(f64),
            "reward_variant" => {
                self.agent.reward_variant = RewardVariant::parse(value).ok_or_else(|| {
                    bad("expected raw, designed, designed_mlp, gdm, or designed_gdm")
                })?
            }
            "reward_clamp" => self.agent.reward_clamp = num!(f64),
            "reward_train_delay_epochs" => {
                self.agent.reward_train_delay_epochs = num!(usize)
            }
            "reward_include_rate" => {
                self.agent.reward_include_rate =
                    value.parse::<bool>().map_err(|_| bad("expected true or false"))?
            }
            "shaper_hidden_width" => self.agent.shaper_hidden_width = num!(usize),
            "state_exploration" => {
                let enabled = value.parse::<bool>().map_err(|_| bad("expected true or false"))?;
                if enabled && self.agent.state_exploration.is_none() {
                    self.agent.state_exploration = Some(default_exploration());
                } else if !enabled {
                    self.agent.state_exploration = None;
                }
            }
            "max_substitute_prob" => {
                self.agent
                    .state_exploration
                    .get_or_insert_with(default_exploration)
                    .max_substitute_prob = num!(f64)
            }
            "substitute_update_rate" => {
                self.agent
                    .state_exploration
                    .get_or_insert_with(default_exploration)
                    .update_rate = num!(f64)
            }
            "senpnn_loss_threshold" => {
                self.agent
                    .state_exploration
                    .get_or_insert_with(default_exploration)
                    .loss_threshold = num!(f64)
            }
            // run controls
            "epochs" => self.epochs = num!(usize),
            "seed" => self.seed = num!(u64),
            "ma_window" => self.ma_window = num!(usize),
            _ => return Err(HarnessError::UnknownKey(key.to_string())),
        }
        Ok(())
    }

    /// Parses a flat `key = value` config text over profile defaults.
    /// Unknown keys are hard errors; `#` starts a comment.
    pub fn parse_str(text: &str, profile: Profile) -> Result<Self, HarnessError> {
        let mut cfg = Self::for_profile(profile);
        for (line_no, raw_line) in text.lines().enumerate() {
            let line = raw_line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(HarnessError::Config {
                    key: format!("line {}", line_no + 1),
                    reason: format!("expected `key = value`, got {raw_line:?}"),
                });
            };
            cfg.apply(key.trim(), value.trim())?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path, profile: Profile) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path)?;
        Self::parse_str(&text, profile)
    }
}

fn default_exploration() -> StateExplorationConfig {
    StateExplorationConfig {
        max_substitute_prob: 0.9,
        update_rate: 0.001,
        loss_threshold: 5e-4,
    }
}
