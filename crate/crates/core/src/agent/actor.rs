use super::critic::CriticPair;
use super::AgentError;
use crate::env::{project_encode, project_encode_vjp, AlignmentFeatures, EnvConfig, NetworkAction};
use crate::gdm::{
    mode1_policy_grad_step, sample_chain, CriticHook, DiffusionSchedule, NoisePredictor,
};
use crate::numerics::{Activation, GradReport, Mlp, RealTensor};
use rand::Rng;
use rand_distr::StandardNormal;

/// The policy network. The diffusion actor concatenates the state to a
/// Gaussian draw and refines it through the reverse chain; the plain actor
/// is a deterministic MLP with additive Gaussian exploration noise.
#[derive(Debug, Clone)]
pub enum Actor {
    Gdm(NoisePredictor),
    Plain { net: Mlp, explore_sigma: f64 },
}

impl Actor {
    pub fn new_gdm(
        state_width: usize,
        action_width: usize,
        hidden_layers: usize,
        hidden_width: usize,
        rng: &mut impl Rng,
    ) -> Self {
        Actor::Gdm(NoisePredictor::new(action_width, state_width, hidden_layers, hidden_width, rng))
    }

    pub fn new_plain(
        state_width: usize,
        action_width: usize,
        hidden_layers: usize,
        hidden_width: usize,
        explore_sigma: f64,
        rng: &mut impl Rng,
    ) -> Self {
        let mut widths = vec![state_width];
        widths.extend(std::iter::repeat(hidden_width).take(hidden_layers));
        widths.push(action_width);
        Actor::Plain {
            net: Mlp::new(&widths, Activation::Silu, Activation::Identity, rng),
            explore_sigma,
        }
    }

    pub fn action_width(&self) -> usize {
        match self {
            Actor::Gdm(net) => net.sample_width(),
            Actor::Plain { net, .. } => net.output_width(),
        }
    }

    /// Raw (pre-projection) policy output for one state, including the
    /// actor's own exploration noise.
    fn raw_action(
        &self,
        state: &RealTensor,
        sched: &DiffusionSchedule,
        rng: &mut impl Rng,
    ) -> Result<RealTensor, AgentError> {
        match self {
            Actor::Gdm(net) => Ok(sample_chain(state, net, sched, rng)?),
            Actor::Plain { net, explore_sigma } => {
                let mut out = net.infer(state)?;
                if *explore_sigma > 0.0 {
                    for v in out.data_mut() {
                        *v += explore_sigma * rng.sample::<f64, _>(StandardNormal);
                    }
                }
                Ok(out)
            }
        }
    }

    /// Raw policy outputs for a batch of states without exploration noise
    /// (used for target-network actions).
    fn raw_actions_deterministic(
        &self,
        states: &RealTensor,
        sched: &DiffusionSchedule,
        rng: &mut impl Rng,
    ) -> Result<RealTensor, AgentError> {
        match self {
            // the reverse chain keeps its own stochasticity; that is the
            // policy's sampling distribution rather than extra exploration
            Actor::Gdm(net) => Ok(sample_chain(states, net, sched, rng)?),
            Actor::Plain { net, .. } => Ok(net.infer(states)?),
        }
    }

    pub fn visit_state(&self, prefix: &str, f: impl FnMut(String, &[f64])) {
        match self {
            Actor::Gdm(net) => net.mlp().visit_state(prefix, f),
            Actor::Plain { net, .. } => net.visit_state(prefix, f),
        }
    }

    pub fn restore_state(
        &mut self,
        prefix: &str,
        lookup: &mut impl FnMut(&str) -> Option<Vec<f64>>,
    ) -> Result<(), crate::numerics::NumericsError> {
        match self {
            Actor::Gdm(net) => net.mlp_mut().restore_state(prefix, lookup),
            Actor::Plain { net, .. } => net.restore_state(prefix, lookup),
        }
    }

    pub fn soft_update_from(&mut self, online: &Actor, tau: f64) -> Result<(), AgentError> {
        match (self, online) {
            (Actor::Gdm(t), Actor::Gdm(o)) => t.mlp_mut().soft_update_from(o.mlp(), tau)?,
            (Actor::Plain { net: t, .. }, Actor::Plain { net: o, .. }) => {
                t.soft_update_from(o, tau)?
            }
            _ => {
                return Err(AgentError::Mismatch(
                    "actor kinds differ between online and target".into(),
                ))
            }
        }
        Ok(())
    }
}

/// ε-greedy action selection: with probability ε a uniform random raw
/// vector replaces the policy output; either way the raw vector is projected
/// onto the feasible set. Returns the physical action and its encoding.
pub fn select_action(
    state: &RealTensor,
    actor: &Actor,
    sched: &DiffusionSchedule,
    epsilon: f64,
    cfg: &EnvConfig,
    rng: &mut impl Rng,
) -> Result<(NetworkAction, Vec<f64>), AgentError> {
    let width = NetworkAction::raw_width(cfg);
    let explore = rng.random::<f64>() < epsilon;
    let raw = if explore {
        let mut v = vec![0.0; width];
        for x in &mut v {
            *x = rng.random_range(-1.0..1.0);
        }
        RealTensor::vector(v)
    } else {
        actor.raw_action(state, sched, rng)?
    };
    let (enc, _) = project_encode(raw.data(), cfg)?;
    let action = NetworkAction::from_encoded(&enc, cfg)?;
    Ok((action, enc))
}

/// Feasible encoded actions of the (target) policy for a batch of states.
pub fn policy_actions_encoded(
    states: &RealTensor,
    actor: &Actor,
    sched: &DiffusionSchedule,
    cfg: &EnvConfig,
    rng: &mut impl Rng,
) -> Result<RealTensor, AgentError> {
    let raw = actor.raw_actions_deterministic(states, sched, rng)?;
    let rows = raw.rows();
    let width = raw.width();
    let mut out = Vec::with_capacity(rows * width);
    for r in 0..rows {
        let (enc, _) = project_encode(raw.row(r), cfg)?;
        out.extend(enc);
    }
    Ok(RealTensor::matrix(rows, width, out)?)
}

/// Critic hook used by the diffusion actor's chain update: projects each
/// generated raw action, scores `min(Q₁,Q₂)` on the featurized
/// `[S | A | F(S,A)]` row, and pulls the critic's gradient back through the
/// feature map and the differentiable projection.
struct ProjectedMinCriticHook<'a> {
    critics: &'a mut CriticPair,
    states: &'a RealTensor,
    features: &'a AlignmentFeatures,
    cfg: &'a EnvConfig,
}

impl CriticHook for ProjectedMinCriticHook<'_> {
    fn value_and_grad(&mut self, samples: &RealTensor) -> (Vec<f64>, RealTensor) {
        let rows = samples.rows();
        let state_w = self.states.width();
        let action_w = samples.width();
        let feat_w = self.features.width();
        let row_w = state_w + action_w + feat_w;
        let mut caches = Vec::with_capacity(rows);
        let mut inputs = Vec::with_capacity(rows * row_w);
        let mut encs = Vec::with_capacity(rows);
        for r in 0..rows {
            let (enc, cache) =
                project_encode(samples.row(r), self.cfg).expect("actor emits policy width");
            inputs.extend_from_slice(self.states.row(r));
            inputs.extend_from_slice(&enc);
            inputs.extend(self.features.compute(self.states.row(r), &enc));
            encs.push(enc);
            caches.push(cache);
        }
        let inputs = RealTensor::matrix(rows, row_w, inputs).expect("sized above");
        let (values, input_grads) = self
            .critics
            .min_value_and_input_grad(&inputs)
            .expect("width checked above");
        let mut grads = Vec::with_capacity(rows * action_w);
        for r in 0..rows {
            let row = input_grads.row(r);
            let mut g_enc: Vec<f64> =
                row.iter().skip(state_w).take(action_w).copied().collect();
            let g_feat: Vec<f64> =
                row.iter().skip(state_w + action_w).copied().collect();
            let g_through_features =
                self.features.vjp_action(self.states.row(r), &g_feat, action_w);
            for (a, b) in g_enc.iter_mut().zip(g_through_features) {
                *a += b;
            }
            grads.extend(project_encode_vjp(&caches[r], &g_enc, self.cfg));
        }
        let grads = RealTensor::matrix(rows, action_w, grads).expect("sized above");
        (values, grads)
    }
}

/// Result of one actor update.
pub struct ActorUpdate {
    pub grad_report: GradReport,
    pub mean_q: f64,
    pub skipped: bool,
}

/// One policy-improvement step on a batch of states, maximizing the
/// conservative critic value of the projected policy output.
#[allow(clippy::too_many_arguments)]
pub fn actor_update(
    states: &RealTensor,
    actor: &mut Actor,
    critics: &mut CriticPair,
    features: &AlignmentFeatures,
    sched: &DiffusionSchedule,
    cfg: &EnvConfig,
    rng: &mut impl Rng,
    learning_rate: f64,
    weight_decay: f64,
) -> Result<ActorUpdate, AgentError> {
    let result = match actor {
        Actor::Gdm(net) => {
            let mut hook = ProjectedMinCriticHook { critics, states, features, cfg };
            let report =
                mode1_policy_grad_step(states, net, sched, &mut hook, rng, learning_rate, weight_decay)?;
            ActorUpdate {
                grad_report: report.grad_report,
                mean_q: report.mean_value,
                skipped: report.skipped,
            }
        }
        Actor::Plain { net, .. } => {
            let rows = states.rows();
            let raw = {
                net.zero_grads();
                net.forward(states)?
            };
            let mut hook = ProjectedMinCriticHook { critics, states, features, cfg };
            let (values, dq) = hook.value_and_grad(&raw);
            let mean_q = values.iter().sum::<f64>() / rows as f64;
            if !mean_q.is_finite() {
                return Ok(ActorUpdate {
                    grad_report: GradReport::zeros(net.num_layers()),
                    mean_q,
                    skipped: true,
                });
            }
            let mut d_raw = dq;
            for v in d_raw.data_mut() {
                *v = -*v / rows as f64;
            }
            let grad_report = net.backward(&d_raw)?;
            match net.adam_step(learning_rate, weight_decay) {
                Ok(()) => ActorUpdate { grad_report, mean_q, skipped: false },
                Err(crate::numerics::NumericsError::NonFiniteGradient) => ActorUpdate {
                    grad_report: GradReport::zeros(net.num_layers()),
                    mean_q,
                    skipped: true,
                },
                Err(e) => return Err(e.into()),
            }
        }
    };
    // remove the stray parameter gradients the hook left in the critics
    critics.zero_grads();
    Ok(result)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::power_residual;
    use crate::gdm::make_schedule;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    fn rng(seed: u64) -> ChaCha20Rng {
        ChaCha20Rng::seed_from_u64(seed)
    }

    fn tiny_cfg() -> EnvConfig {
        EnvConfig {
            downlink_users: 2,
            uplink_users: 2,
            tx_antennas: 3,
            rx_antennas: 3,
            ..EnvConfig::default()
        }
    }

    #[test]
    fn epsilon_one_explores_independently_of_state() {
        let cfg = tiny_cfg();
        let sched = make_schedule(6, 1e-4, 0.2).unwrap();
        let state_w = crate::env::state_width(&cfg);
        let actor = Actor::new_gdm(state_w, NetworkAction::raw_width(&cfg), 2, 8, &mut rng(0));
        let s1 = RealTensor::vector(vec![0.25; state_w]);
        let s2 = RealTensor::vector(vec![-0.75; state_w]);
        // ε = 1: identical rng stream must give identical actions for any state
        let (_, e1) = select_action(&s1, &actor, &sched, 1.0, &cfg, &mut rng(5)).unwrap();
        let (_, e2) = select_action(&s2, &actor, &sched, 1.0, &cfg, &mut rng(5)).unwrap();
        assert_eq!(e1, e2);
    }

    #[test]
    fn epsilon_zero_is_deterministic_given_seed_and_actor() {
        let cfg = tiny_cfg();
        let sched = make_schedule(6, 1e-4, 0.2).unwrap();
        let state_w = crate::env::state_width(&cfg);
        let actor = Actor::new_gdm(state_w, NetworkAction::raw_width(&cfg), 2, 8, &mut rng(1));
        let s = RealTensor::vector(vec![0.1; state_w]);
        let (_, e1) = select_action(&s, &actor, &sched, 0.0, &cfg, &mut rng(9)).unwrap();
        let (_, e2) = select_action(&s, &actor, &sched, 0.0, &cfg, &mut rng(9)).unwrap();
        assert_eq!(e1, e2);
    }

    #[test]
    fn all_selected_actions_are_feasible() {
        let cfg = tiny_cfg();
        let sched = make_schedule(6, 1e-4, 0.2).unwrap();
        let state_w = crate::env::state_width(&cfg);
        let actor = Actor::new_gdm(state_w, NetworkAction::raw_width(&cfg), 2, 8, &mut rng(2));
        let mut r = rng(3);
        for _ in 0..10_000 {
            use rand::Rng as _;
            let s = RealTensor::vector(
                (0..state_w).map(|_| r.random_range(-1.0..1.0)).collect::<Vec<_>>(),
            );
            let (action, _) = select_action(&s, &actor, &sched, 0.1, &cfg, &mut r).unwrap();
            assert!(power_residual(&action, &cfg) < 1e-9);
        }
    }

    #[test]
    fn constant_critics_give_vanishing_actor_gradient() {
        let cfg = tiny_cfg();
        let sched = make_schedule(4, 1e-3, 0.2).unwrap();
        let state_w = crate::env::state_width(&cfg);
        let action_w = NetworkAction::raw_width(&cfg);
        let mut actor = Actor::new_gdm(state_w, action_w, 2, 8, &mut rng(4));
        let feats = AlignmentFeatures::new(&cfg);
        let mut critics =
            CriticPair::new(state_w + action_w + feats.width(), 2, 8, &mut rng(5));
        // bias-only constant critics
        let mut p = vec![0.0; critics.q1().param_count()];
        let n = p.len();
        p[n - 1] = 3.0;
        let mut c1 = critics.q1().clone();
        c1.set_params_flat(&p).unwrap();
        p[n - 1] = 4.0;
        let mut c2 = critics.q2().clone();
        c2.set_params_flat(&p).unwrap();
        critics.replace_online_for_tests(c1, c2);

        let states = RealTensor::matrix(4, state_w, vec![0.2; 4 * state_w]).unwrap();
        let update = actor_update(
            &states,
            &mut actor,
            &mut critics,
            &feats,
            &sched,
            &cfg,
            &mut rng(6),
            1e-3,
            0.0,
        )
        .unwrap();
        assert!(
            update.grad_report.total_weight() + update.grad_report.total_bias() < 1e-8,
            "gradient should vanish for constant critics"
        );
    }

    #[test]
    fn plain_actor_update_descends_toward_higher_q() {
        let cfg = tiny_cfg();
        let sched = make_schedule(4, 1e-3, 0.2).unwrap();
        let state_w = crate::env::state_width(&cfg);
        let action_w = NetworkAction::raw_width(&cfg);
        let mut actor = Actor::new_plain(state_w, action_w, 2, 16, 0.0, &mut rng(7));
        let feats = AlignmentFeatures::new(&cfg);
        let mut critics =
            CriticPair::new(state_w + action_w + feats.width(), 2, 16, &mut rng(8));
        let states = RealTensor::matrix(8, state_w, vec![0.1; 8 * state_w]).unwrap();
        let before = actor_update(
            &states, &mut actor, &mut critics, &feats, &sched, &cfg, &mut rng(9), 1e-3, 0.0,
        )
        .unwrap()
        .mean_q;
        let mut last = before;
        for i in 0..50 {
            last = actor_update(
                &states,
                &mut actor,
                &mut critics,
                &feats,
                &sched,
                &cfg,
                &mut rng(10 + i),
                1e-3,
                0.0,
            )
            .unwrap()
            .mean_q;
        }
        assert!(last > before, "mean Q did not increase: {before} -> {last}");
    }
}
