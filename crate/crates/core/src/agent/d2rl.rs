use super::actor::{actor_update, policy_actions_encoded, select_action, Actor};
use super::critic::CriticPair;
use super::explore::{StateExplorationConfig, StateExplorer};
use super::replay::{ReplayBuffer, Transition};
use super::AgentError;
use crate::env::{
    encode_state, power_residual, state_width, AlignmentFeatures, EnvConfig, NetworkAction,
    WirelessEnv,
};
use crate::gdm::{denoise_train_step, make_schedule, DiffusionSchedule};
use crate::numerics::{GradReport, RealTensor};
use crate::rewards::{RewardDesign, RewardNetConfig, RewardVariant};
use rand::Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ActorKind {
    /// Diffusion policy: reverse chain conditioned on the state.
    Gdm,
    /// Deterministic MLP policy with additive exploration noise.
    Mlp,
}

impl ActorKind {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "gdm" => Some(Self::Gdm),
            "mlp" => Some(Self::Mlp),
            _ => None,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::Gdm => "gdm",
            Self::Mlp => "mlp",
        }
    }
}

/// Agent hyperparameters. Defaults are the reference desk-scale settings.
#[derive(Debug, Clone)]
pub struct AgentConfig {
    pub actor_kind: ActorKind,
    pub hidden_width: usize,
    pub actor_hidden_layers: usize,
    pub state_net_hidden_layers: usize,
    pub reward_net_hidden_layers: usize,
    pub critic_hidden_layers: usize,
    pub lr_actor: f64,
    pub lr_critic: f64,
    pub lr_state_net: f64,
    pub lr_reward_net: f64,
    pub weight_decay: f64,
    pub tau: f64,
    pub gamma: f64,
    pub diffusion_steps: usize,
    pub beta_min: f64,
    pub beta_max: f64,
    pub batch_size: usize,
    pub buffer_capacity: usize,
    pub epsilon_greedy: f64,
    /// Batch optimization passes per epoch (the reference loop runs one).
    pub updates_per_epoch: usize,
    /// Exploration noise of the plain MLP actor.
    pub mlp_actor_noise: f64,
    pub reward_variant: RewardVariant,
    pub reward_clamp: f64,
    pub reward_include_rate: bool,
    /// Epochs to wait before training the learned reward networks (their
    /// outputs are live from the start; only their updates are delayed so
    /// the critics see a stationary signal first).
    pub reward_train_delay_epochs: usize,
    pub shaper_hidden_width: usize,
    pub state_exploration: Option<StateExplorationConfig>,
}

impl Default for AgentConfig {
    fn default() -> Self {
        Self {
            actor_kind: ActorKind::Gdm,
            hidden_width: 256,
            actor_hidden_layers: 4,
            state_net_hidden_layers: 4,
            reward_net_hidden_layers: 5,
            critic_hidden_layers: 2,
            lr_actor: 5e-5,
            lr_critic: 1e-3,
            lr_state_net: 1e-4,
            lr_reward_net: 5e-5,
            weight_decay: 7e-5,
            tau: 5e-3,
            gamma: 1.0,
            diffusion_steps: 6,
            beta_min: 1e-4,
            beta_max: 0.2,
            batch_size: 256,
            buffer_capacity: 100_000,
            epsilon_greedy: 0.1,
            updates_per_epoch: 1,
            mlp_actor_noise: 0.1,
            reward_variant: RewardVariant::Raw,
            reward_clamp: 2.0,
            reward_include_rate: true,
            reward_train_delay_epochs: 0,
            shaper_hidden_width: 64,
            state_exploration: None,
        }
    }
}

/// Everything the harness records about one epoch.
#[derive(Debug, Clone)]
pub struct EpochStats {
    pub mean_sum_rate: f64,
    pub mean_reward: f64,
    pub updated: bool,
    pub actor_report: GradReport,
    pub critic_report: GradReport,
    pub critic_loss: f64,
    pub mean_q: f64,
    pub chi: f64,
    pub senpnn_loss_ema: f64,
    pub buffer_len: usize,
    pub divergence_skips: u64,
    pub substituted_steps: u64,
}

/// The double-critic actor-critic agent with diffusion-based action, state,
/// and reward exploration.
#[derive(Debug, Clone)]
pub struct Agent {
    cfg: AgentConfig,
    env_cfg: EnvConfig,
    sched: DiffusionSchedule,
    actor: Actor,
    target_actor: Actor,
    critics: CriticPair,
    features: AlignmentFeatures,
    explorer: Option<StateExplorer>,
    reward: RewardDesign,
    replay: ReplayBuffer,
    epochs_trained: u64,
    pub actions_executed: u64,
    pub feasibility_violations: u64,
}

impl Agent {
    pub fn new(env_cfg: &EnvConfig, cfg: AgentConfig, rng: &mut impl Rng) -> Result<Self, AgentError> {
        let s_w = state_width(env_cfg);
        let a_w = NetworkAction::raw_width(env_cfg);
        let sched = make_schedule(cfg.diffusion_steps, cfg.beta_min, cfg.beta_max)?;
        let actor = match cfg.actor_kind {
            ActorKind::Gdm => {
                Actor::new_gdm(s_w, a_w, cfg.actor_hidden_layers, cfg.hidden_width, rng)
            }
            ActorKind::Mlp => Actor::new_plain(
                s_w,
                a_w,
                cfg.actor_hidden_layers,
                cfg.hidden_width,
                cfg.mlp_actor_noise,
                rng,
            ),
        };
        let target_actor = actor.clone();
        let features = AlignmentFeatures::new(env_cfg);
        let critics = CriticPair::new(
            s_w + a_w + features.width(),
            cfg.critic_hidden_layers,
            cfg.hidden_width,
            rng,
        );
        let explorer = match &cfg.state_exploration {
            Some(ex_cfg) => Some(StateExplorer::new(
                ex_cfg.clone(),
                s_w,
                cfg.state_net_hidden_layers,
                cfg.hidden_width,
                rng,
            )?),
            None => None,
        };
        let reward = RewardDesign::new(
            cfg.reward_variant,
            s_w,
            a_w,
            &RewardNetConfig {
                hidden_layers: cfg.reward_net_hidden_layers,
                hidden_width: cfg.hidden_width,
                shaper_hidden_width: cfg.shaper_hidden_width,
                clamp: cfg.reward_clamp,
                include_rate: cfg.reward_include_rate,
            },
            rng,
        );
        let replay = ReplayBuffer::new(cfg.buffer_capacity);
        Ok(Self {
            cfg,
            env_cfg: env_cfg.clone(),
            sched,
            actor,
            target_actor,
            critics,
            features,
            explorer,
            reward,
            replay,
            epochs_trained: 0,
            actions_executed: 0,
            feasibility_violations: 0,
        })
    }

    pub fn cfg(&self) -> &AgentConfig {
        &self.cfg
    }

    pub fn schedule(&self) -> &DiffusionSchedule {
        &self.sched
    }

    pub fn replay(&self) -> &ReplayBuffer {
        &self.replay
    }

    pub fn critics(&self) -> &CriticPair {
        &self.critics
    }

    pub fn explorer(&self) -> Option<&StateExplorer> {
        self.explorer.as_ref()
    }

    pub fn reward_design(&self) -> &RewardDesign {
        &self.reward
    }

    /// One epoch of the main loop: reset the episode, collect
    /// `steps_per_epoch` experiences, then run the configured number of
    /// batch optimization passes and soft-update the targets.
    pub fn train_epoch(
        &mut self,
        env: &mut WirelessEnv,
        rng: &mut impl Rng,
    ) -> Result<EpochStats, AgentError> {
        let steps = env.cfg().steps_per_epoch;
        let episode_len = env.cfg().episode_length.min(steps).max(1);
        self.epochs_trained += 1;

        let mut sum_rate_acc = 0.0;
        let mut reward_acc = 0.0;
        let mut substituted_steps = 0;
        for t in 1..=steps {
            if (t - 1) % episode_len == 0 {
                env.reset(rng);
            }
            let true_state = encode_state(env.state(), &self.env_cfg);
            let upper = self.reward.prepare_state(env.state(), &self.env_cfg);

            let (seen_state, substituted) = match self.explorer.as_mut() {
                Some(explorer) => explorer.substitute(&true_state, &self.sched, rng)?,
                None => (true_state.clone(), false),
            };
            if substituted {
                substituted_steps += 1;
            }

            let (action, a_enc) = select_action(
                &seen_state,
                &self.actor,
                &self.sched,
                self.cfg.epsilon_greedy,
                &self.env_cfg,
                rng,
            )?;
            self.actions_executed += 1;
            if power_residual(&action, &self.env_cfg) > 1e-9 {
                self.feasibility_violations += 1;
            }

            let report = env.step(&action, rng)?;
            let reward = self.reward.emit(
                seen_state.data(),
                &a_enc,
                &report,
                &self.sched,
                rng,
            )?;
            let next_state = encode_state(env.state(), &self.env_cfg);

            sum_rate_acc += report.sum_rate;
            reward_acc += reward;
            self.replay.push(Transition {
                state: seen_state.into_data(),
                action: a_enc,
                next_state: next_state.into_data(),
                reward,
                sum_rate: report.sum_rate,
                upper_bound: upper,
                done: t % episode_len == 0 || t == steps,
            });
        }

        let mut stats = EpochStats {
            mean_sum_rate: sum_rate_acc / steps as f64,
            mean_reward: reward_acc / steps as f64,
            updated: false,
            actor_report: GradReport::zeros(actor_layers(&self.actor)),
            critic_report: GradReport::zeros(self.cfg.critic_hidden_layers + 1),
            critic_loss: 0.0,
            mean_q: 0.0,
            chi: self.explorer.as_ref().map_or(0.0, |e| e.chi()),
            senpnn_loss_ema: self
                .explorer
                .as_ref()
                .and_then(|e| e.loss_ema())
                .unwrap_or(f64::NAN),
            buffer_len: self.replay.len(),
            divergence_skips: 0,
            substituted_steps,
        };

        // warm-up rule: no gradient work until one full batch is available
        if self.replay.len() < self.cfg.batch_size {
            return Ok(stats);
        }

        for _ in 0..self.cfg.updates_per_epoch.max(1) {
            self.optimize_batch(&mut stats, rng)?;
        }
        stats.updated = true;
        stats.chi = self.explorer.as_ref().map_or(0.0, |e| e.chi());
        stats.senpnn_loss_ema = self
            .explorer
            .as_ref()
            .and_then(|e| e.loss_ema())
            .unwrap_or(f64::NAN);
        stats.buffer_len = self.replay.len();
        Ok(stats)
    }

    fn optimize_batch(&mut self, stats: &mut EpochStats, rng: &mut impl Rng) -> Result<(), AgentError> {
        let batch = self.cfg.batch_size;
        let s_w = state_width(&self.env_cfg);
        let a_w = NetworkAction::raw_width(&self.env_cfg);
        let idx = self.replay.sample_indices(batch, rng);

        let mut states = Vec::with_capacity(batch * s_w);
        let mut actions = Vec::with_capacity(batch * a_w);
        let mut next_states = Vec::with_capacity(batch * s_w);
        let mut rewards = Vec::with_capacity(batch);
        let mut dones = Vec::with_capacity(batch);
        let mut sum_rates = Vec::with_capacity(batch);
        let mut uppers = Vec::with_capacity(batch);
        for &i in &idx {
            let tr = self.replay.get(i);
            states.extend_from_slice(&tr.state);
            actions.extend_from_slice(&tr.action);
            next_states.extend_from_slice(&tr.next_state);
            rewards.push(tr.reward);
            dones.push(tr.done);
            sum_rates.push(tr.sum_rate);
            uppers.push(tr.upper_bound);
        }
        let states = RealTensor::matrix(batch, s_w, states)?;
        let actions = RealTensor::matrix(batch, a_w, actions)?;
        let next_states = RealTensor::matrix(batch, s_w, next_states)?;

        // state denoiser trains on the batch's states
        if let Some(explorer) = self.explorer.as_mut() {
            let cond = RealTensor::zeros(&[batch, 0]);
            let loss = denoise_train_step(
                &states,
                &cond,
                explorer.senpnn_mut(),
                &self.sched,
                rng,
                self.cfg.lr_state_net,
                self.cfg.weight_decay,
            )?;
            explorer.record_loss(loss);
        }

        // TD targets through the target actor and the min of both target critics
        let next_actions =
            policy_actions_encoded(&next_states, &self.target_actor, &self.sched, &self.env_cfg, rng)?;
        let next_inputs = self.critic_inputs(&next_states, &next_actions)?;
        let audit = self.critics.targets(&next_inputs, &rewards, &dones, self.cfg.gamma)?;
        // instrumented conservatism audit: the target must equal the
        // elementwise minimum rule, recomputed here from the raw values
        for j in 0..batch {
            let bootstrap = if dones[j] {
                0.0
            } else {
                self.cfg.gamma * audit.t1_values[j].min(audit.t2_values[j])
            };
            assert!(
                (audit.targets[j] - (rewards[j] + bootstrap)).abs() <= 1e-12,
                "double-critic min rule violated on batch element {j}"
            );
        }

        let inputs = self.critic_inputs(&states, &actions)?;
        let (l1, l2, report1, _report2) =
            self.critics.update(&inputs, &audit.targets, self.cfg.lr_critic, self.cfg.weight_decay)?;
        stats.critic_loss = 0.5 * (l1 + l2);
        stats.critic_report = report1;

        let update = actor_update(
            &states,
            &mut self.actor,
            &mut self.critics,
            &self.features,
            &self.sched,
            &self.env_cfg,
            rng,
            self.cfg.lr_actor,
            self.cfg.weight_decay,
        )?;
        if update.skipped {
            stats.divergence_skips += 1;
        }
        stats.actor_report = update.grad_report;
        stats.mean_q = update.mean_q;

        // learned reward designs train on an advantage signal from the
        // conservative critic, after an optional critic warm-up delay
        let reward_nets_live = self.epochs_trained > self.cfg.reward_train_delay_epochs as u64;
        if reward_nets_live && (self.reward.shaper.is_some() || self.reward.gdm.is_some()) {
            let q_values = self.critics.min_value(&inputs)?;
            let advantages = standardize(&q_values);
            if let Some(shaper) = self.reward.shaper.as_mut() {
                let mut rows = Vec::with_capacity(batch * (s_w + a_w + 1));
                for j in 0..batch {
                    rows.extend_from_slice(states.row(j));
                    rows.extend_from_slice(actions.row(j));
                    rows.push(sum_rates[j] - uppers[j]);
                }
                let inputs = RealTensor::matrix(batch, s_w + a_w + 1, rows)?;
                shaper.train_step(
                    &inputs,
                    &advantages,
                    self.cfg.lr_reward_net,
                    self.cfg.weight_decay,
                )?;
            }
            if let Some(gdm) = self.reward.gdm.as_mut() {
                let cond_w = gdm.cond_width();
                let mut rows = Vec::with_capacity(batch * cond_w);
                for j in 0..batch {
                    rows.extend(gdm.build_cond(states.row(j), actions.row(j), sum_rates[j]));
                }
                let cond = RealTensor::matrix(batch, cond_w, rows)?;
                gdm.train_step(
                    &cond,
                    &advantages,
                    &self.sched,
                    rng,
                    self.cfg.lr_reward_net,
                    self.cfg.weight_decay,
                )?;
            }
        }

        self.critics.soft_update(self.cfg.tau)?;
        self.target_actor.soft_update_from(&self.actor, self.cfg.tau)?;
        Ok(())
    }

    /// Assembles `[S | A | F(S,A)]` rows for the critics.
    fn critic_inputs(
        &self,
        states: &RealTensor,
        actions: &RealTensor,
    ) -> Result<RealTensor, crate::numerics::NumericsError> {
        let rows = states.rows();
        debug_assert_eq!(rows, actions.rows());
        let width = states.width() + actions.width() + self.features.width();
        let mut out = Vec::with_capacity(rows * width);
        for r in 0..rows {
            out.extend_from_slice(states.row(r));
            out.extend_from_slice(actions.row(r));
            out.extend(self.features.compute(states.row(r), actions.row(r)));
        }
        RealTensor::matrix(rows, width, out)
    }

    /// Audits every stored action against the power constraints.
    pub fn replay_feasibility_violations(&self) -> usize {
        self.replay
            .iter()
            .filter(|tr| {
                match NetworkAction::from_encoded(&tr.action, &self.env_cfg) {
                    Ok(action) => power_residual(&action, &self.env_cfg) > 1e-9,
                    Err(_) => true,
                }
            })
            .count()
    }

    pub fn visit_state(&self, mut f: impl FnMut(String, &[f64])) {
        self.actor.visit_state("actor", &mut f);
        self.target_actor.visit_state("target_actor", &mut f);
        self.critics.visit_state("critics", &mut f);
        if let Some(explorer) = &self.explorer {
            explorer.visit_state("explorer", &mut f);
        }
        if let Some(shaper) = &self.reward.shaper {
            shaper.visit_state("reward.shaper", &mut f);
        }
        if let Some(gdm) = &self.reward.gdm {
            gdm.visit_state("reward.gdm", &mut f);
        }
    }

    pub fn restore_state(
        &mut self,
        lookup: &mut impl FnMut(&str) -> Option<Vec<f64>>,
    ) -> Result<(), crate::numerics::NumericsError> {
        self.actor.restore_state("actor", lookup)?;
        self.target_actor.restore_state("target_actor", lookup)?;
        self.critics.restore_state("critics", lookup)?;
        if let Some(explorer) = self.explorer.as_mut() {
            explorer.restore_state("explorer", lookup)?;
        }
        if let Some(shaper) = self.reward.shaper.as_mut() {
            shaper.restore_state("reward.shaper", lookup)?;
        }
        if let Some(gdm) = self.reward.gdm.as_mut() {
            gdm.restore_state("reward.gdm", lookup)?;
        }
        Ok(())
    }
}

fn actor_layers(actor: &Actor) -> usize {
    match actor {
        Actor::Gdm(net) => net.mlp().num_layers(),
        Actor::Plain { net, .. } => net.num_layers(),
    }
}

fn standardize(values: &[f64]) -> Vec<f64> {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    let std = var.sqrt().max(1e-9);
    values.iter().map(|v| (v - mean) / std).collect()
}
