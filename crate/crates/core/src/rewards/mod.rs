//! The five reward designs and their networks: raw sum rate, expert-designed
//! reward against a per-state upper bound, an MLP-shaped variant, a
//! diffusion-generated reward, and the designed reward with a diffusion
//! residual. The learned designs are trained with an advantage-weighted
//! critic signal, which keeps them discriminative instead of letting a
//! self-scored reward saturate its own clamp.

use crate::env::{ChannelState, EnvConfig, RateReport};
use crate::gdm::{
    chain_backward, sample_chain, sample_chain_traced, DiffusionSchedule, GdmError, NoisePredictor,
};
use crate::numerics::{Activation, GradReport, Mlp, RealTensor};
use rand::Rng;
use std::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RewardVariant {
    /// R = C, the raw optimization objective.
    Raw,
    /// R = C − R′ against the per-state upper bound R′.
    Designed,
    /// The designed reward passed through a trained MLP shaper.
    DesignedMlp,
    /// Reward generated by a conditional diffusion chain.
    Gdm,
    /// Designed reward plus a clamped diffusion residual.
    DesignedGdm,
}

impl RewardVariant {
    pub const ALL: [RewardVariant; 5] = [
        RewardVariant::Raw,
        RewardVariant::Designed,
        RewardVariant::DesignedMlp,
        RewardVariant::Gdm,
        RewardVariant::DesignedGdm,
    ];

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "raw" => Some(Self::Raw),
            "designed" => Some(Self::Designed),
            "designed_mlp" => Some(Self::DesignedMlp),
            "gdm" => Some(Self::Gdm),
            "designed_gdm" => Some(Self::DesignedGdm),
            _ => None,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::Raw => "raw",
            Self::Designed => "designed",
            Self::DesignedMlp => "designed_mlp",
            Self::Gdm => "gdm",
            Self::DesignedGdm => "designed_gdm",
        }
    }

    /// Variants that carry a diffusion reward network.
    pub fn uses_gdm(&self) -> bool {
        matches!(self, Self::Gdm | Self::DesignedGdm)
    }
}

impl fmt::Display for RewardVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// The raw reward: the system objective itself.
pub fn raw_reward(report: &RateReport) -> f64 {
    report.sum_rate
}

/// Interference-free matched-filter bound on the sum rate for a state:
/// every downlink user served at full `P_max`, every uplink user at full
/// `P_l`, no cross terms and no clutter. Dominates the achievable C of any
/// feasible action (Cauchy–Schwarz on the beams, monotonicity in power).
pub fn upper_bound(state: &ChannelState, cfg: &EnvConfig) -> f64 {
    let dl: f64 = state
        .dl_channels
        .iter()
        .map(|g| {
            let gain: f64 = g.iter().map(|z| z.norm_sqr()).sum();
            (1.0 + gain * cfg.max_bs_power_w / cfg.noise_dl_w).log2()
        })
        .sum();
    let ul: f64 = state
        .ul_channels
        .iter()
        .map(|h| {
            let gain: f64 = h.iter().map(|z| z.norm_sqr()).sum();
            (1.0 + cfg.max_ul_power_w * gain / cfg.noise_ul_w).log2()
        })
        .sum();
    dl + ul
}

/// Expert-designed reward `R = C − R′ ≤ 0`, zero only at the bound.
pub fn designed_reward(report: &RateReport, upper: f64) -> f64 {
    report.sum_rate - upper
}

/// MLP reward shaper over `[S | A | base]` with an exact affine skip path:
/// output = skip(x) + mlp(x). Passthrough initialization sets the skip to
/// select the base reward and zeroes the MLP head, so shaping starts as a
/// no-op; a fully zeroed shaper outputs 0 regardless of input.
#[derive(Debug, Clone)]
pub struct RewardShaper {
    skip: Mlp,
    mlp: Mlp,
    input_width: usize,
}

impl RewardShaper {
    /// `input_width` counts `[S | A | base]`; the base reward is the last
    /// entry.
    pub fn new(input_width: usize, hidden_width: usize, rng: &mut impl Rng) -> Self {
        let mut skip = Mlp::new(&[input_width, 1], Activation::Identity, Activation::Identity, rng);
        // passthrough: select the trailing base entry
        let mut params = vec![0.0; skip.param_count()];
        params[input_width - 1] = 1.0;
        skip.set_params_flat(&params).expect("sized above");
        let mut mlp = Mlp::new(
            &[input_width, hidden_width, hidden_width, 1],
            Activation::Silu,
            Activation::Identity,
            rng,
        );
        mlp.zero_final_layer();
        Self { skip, mlp, input_width }
    }

    pub fn input_width(&self) -> usize {
        self.input_width
    }

    pub fn zero_all(&mut self) {
        self.skip.zero_all_params();
        self.mlp.zero_all_params();
    }

    pub fn infer(&self, input: &RealTensor) -> Result<f64, crate::numerics::NumericsError> {
        Ok(self.skip.infer(input)?.data()[0] + self.mlp.infer(input)?.data()[0])
    }

    /// Batched advantage-weighted update: descends `−mean(out_j · adv_j)`.
    /// Returns the mean shaped output.
    pub fn train_step(
        &mut self,
        inputs: &RealTensor,
        advantages: &[f64],
        learning_rate: f64,
        weight_decay: f64,
    ) -> Result<f64, crate::numerics::NumericsError> {
        let rows = inputs.rows();
        debug_assert_eq!(rows, advantages.len());
        self.skip.zero_grads();
        self.mlp.zero_grads();
        let out_skip = self.skip.forward(inputs)?;
        let out_mlp = self.mlp.forward(inputs)?;
        let mean = (0..rows)
            .map(|r| out_skip.row(r)[0] + out_mlp.row(r)[0])
            .sum::<f64>()
            / rows as f64;
        let grad: Vec<f64> = advantages.iter().map(|a| -a / rows as f64).collect();
        let grad = RealTensor::matrix(rows, 1, grad)?;
        self.skip.backward(&grad)?;
        self.mlp.backward(&grad)?;
        self.skip.adam_step(learning_rate, weight_decay)?;
        self.mlp.adam_step(learning_rate, weight_decay)?;
        Ok(mean)
    }

    pub fn visit_state(&self, prefix: &str, mut f: impl FnMut(String, &[f64])) {
        self.skip.visit_state(&format!("{prefix}.skip"), &mut f);
        self.mlp.visit_state(&format!("{prefix}.mlp"), &mut f);
    }

    pub fn restore_state(
        &mut self,
        prefix: &str,
        lookup: &mut impl FnMut(&str) -> Option<Vec<f64>>,
    ) -> Result<(), crate::numerics::NumericsError> {
        self.skip.restore_state(&format!("{prefix}.skip"), lookup)?;
        self.mlp.restore_state(&format!("{prefix}.mlp"), lookup)
    }
}

/// Shaped reward `shaper(S, A, base)`.
pub fn mlp_shaped_reward(
    s_enc: &[f64],
    a_enc: &[f64],
    base: f64,
    shaper: &RewardShaper,
) -> Result<f64, crate::numerics::NumericsError> {
    let mut input = Vec::with_capacity(s_enc.len() + a_enc.len() + 1);
    input.extend_from_slice(s_enc);
    input.extend_from_slice(a_enc);
    input.push(base);
    shaper.infer(&RealTensor::vector(input))
}

/// A diffusion reward network: a scalar-sample chain conditioned on
/// `[S | A | C]` (the rate term is optional), with a linear output head and
/// a symmetric clamp on the emitted value.
#[derive(Debug, Clone)]
pub struct GdmRewardNet {
    chain_net: NoisePredictor,
    head: Mlp,
    clamp: f64,
    include_rate: bool,
}

impl GdmRewardNet {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        state_width: usize,
        action_width: usize,
        hidden_layers: usize,
        hidden_width: usize,
        clamp: f64,
        include_rate: bool,
        zero_head: bool,
        rng: &mut impl Rng,
    ) -> Self {
        let cond_width = state_width + action_width + usize::from(include_rate);
        let chain_net = NoisePredictor::new(1, cond_width, hidden_layers, hidden_width, rng);
        let mut head = Mlp::new(&[1, 1], Activation::Identity, Activation::Identity, rng);
        if zero_head {
            head.zero_all_params();
        } else {
            head.set_params_flat(&[1.0, 0.0]).expect("1x1 head");
        }
        Self { chain_net, head, clamp, include_rate }
    }

    pub fn chain_net(&self) -> &NoisePredictor {
        &self.chain_net
    }

    pub fn clamp(&self) -> f64 {
        self.clamp
    }

    pub fn include_rate(&self) -> bool {
        self.include_rate
    }

    fn cond_row(&self, s_enc: &[f64], a_enc: &[f64], rate: f64) -> Vec<f64> {
        let mut cond = Vec::with_capacity(s_enc.len() + a_enc.len() + 1);
        cond.extend_from_slice(s_enc);
        cond.extend_from_slice(a_enc);
        if self.include_rate {
            cond.push(rate);
        }
        cond
    }

    /// Conditioning width of the underlying chain.
    pub fn cond_width(&self) -> usize {
        self.chain_net.cond_width()
    }

    /// Builds one conditioning row; exposed for batched training.
    pub fn build_cond(&self, s_enc: &[f64], a_enc: &[f64], rate: f64) -> Vec<f64> {
        self.cond_row(s_enc, a_enc, rate)
    }

    /// Generates the clamped scalar reward for one `(S, A)` pair.
    pub fn generate(
        &self,
        s_enc: &[f64],
        a_enc: &[f64],
        rate: f64,
        sched: &DiffusionSchedule,
        rng: &mut impl Rng,
    ) -> Result<f64, GdmError> {
        let cond = RealTensor::vector(self.cond_row(s_enc, a_enc, rate));
        let x0 = sample_chain(&cond, &self.chain_net, sched, rng)?;
        let out = self.head.infer(&x0)?.data()[0];
        Ok(out.clamp(-self.clamp, self.clamp))
    }

    /// Advantage-weighted chain update over a batch of conditioning rows:
    /// descends `−mean(r_j · adv_j)` through the head and the whole reverse
    /// chain. Returns the grad report of the chain network.
    pub fn train_step(
        &mut self,
        cond_rows: &RealTensor,
        advantages: &[f64],
        sched: &DiffusionSchedule,
        rng: &mut impl Rng,
        learning_rate: f64,
        weight_decay: f64,
    ) -> Result<GradReport, GdmError> {
        let rows = cond_rows.rows();
        debug_assert_eq!(rows, advantages.len());
        let (x0, trace) = sample_chain_traced(cond_rows, &self.chain_net, sched, rng)?;
        self.head.zero_grads();
        self.chain_net.mlp_mut().zero_grads();
        let out = self.head.forward(&x0)?;
        // clamp passes gradient only strictly inside the band
        let grad: Vec<f64> = (0..rows)
            .map(|r| {
                let inside = out.row(r)[0].abs() < self.clamp;
                if inside {
                    -advantages[r] / rows as f64
                } else {
                    0.0
                }
            })
            .collect();
        self.head.backward(&RealTensor::matrix(rows, 1, grad)?)?;
        let d_x0 = self.head.last_input_grad().expect("backward just ran").clone();
        chain_backward(&mut self.chain_net, sched, &trace, &d_x0)?;
        let report = self.chain_net.mlp().grad_report();
        self.head.adam_step(learning_rate, weight_decay)?;
        self.chain_net.mlp_mut().adam_step(learning_rate, weight_decay)?;
        Ok(report)
    }

    pub fn visit_state(&self, prefix: &str, mut f: impl FnMut(String, &[f64])) {
        self.chain_net.mlp().visit_state(&format!("{prefix}.chain"), &mut f);
        self.head.visit_state(&format!("{prefix}.head"), &mut f);
    }

    pub fn restore_state(
        &mut self,
        prefix: &str,
        lookup: &mut impl FnMut(&str) -> Option<Vec<f64>>,
    ) -> Result<(), crate::numerics::NumericsError> {
        self.chain_net.mlp_mut().restore_state(&format!("{prefix}.chain"), lookup)?;
        self.head.restore_state(&format!("{prefix}.head"), lookup)
    }
}

/// Diffusion-generated reward for one pair.
pub fn gdm_reward(
    s_enc: &[f64],
    a_enc: &[f64],
    rate: f64,
    net: &GdmRewardNet,
    sched: &DiffusionSchedule,
    rng: &mut impl Rng,
) -> Result<f64, GdmError> {
    net.generate(s_enc, a_enc, rate, sched, rng)
}

/// Designed reward plus the clamped diffusion residual.
#[allow(clippy::too_many_arguments)]
pub fn designed_plus_gdm_reward(
    s_enc: &[f64],
    a_enc: &[f64],
    report: &RateReport,
    upper: f64,
    net: &GdmRewardNet,
    sched: &DiffusionSchedule,
    rng: &mut impl Rng,
) -> Result<f64, GdmError> {
    Ok(designed_reward(report, upper) + net.generate(s_enc, a_enc, report.sum_rate, sched, rng)?)
}

/// Hyperparameters of the learned reward networks.
#[derive(Debug, Clone)]
pub struct RewardNetConfig {
    pub hidden_layers: usize,
    pub hidden_width: usize,
    pub shaper_hidden_width: usize,
    pub clamp: f64,
    pub include_rate: bool,
}

/// One agent's reward design: the variant tag plus whatever networks and
/// per-state cache it needs.
#[derive(Debug, Clone)]
pub struct RewardDesign {
    pub variant: RewardVariant,
    pub shaper: Option<RewardShaper>,
    pub gdm: Option<GdmRewardNet>,
    last_upper_bound: Option<f64>,
}

impl RewardDesign {
    pub fn new(
        variant: RewardVariant,
        state_width: usize,
        action_width: usize,
        cfg: &RewardNetConfig,
        rng: &mut impl Rng,
    ) -> Self {
        let shaper = matches!(variant, RewardVariant::DesignedMlp)
            .then(|| RewardShaper::new(state_width + action_width + 1, cfg.shaper_hidden_width, rng));
        let gdm = variant.uses_gdm().then(|| {
            GdmRewardNet::new(
                state_width,
                action_width,
                cfg.hidden_layers,
                cfg.hidden_width,
                cfg.clamp,
                cfg.include_rate,
                // the residual on top of the designed base starts exactly at
                // zero; the standalone variant keeps a live head
                variant == RewardVariant::DesignedGdm,
                rng,
            )
        });
        Self { variant, shaper, gdm, last_upper_bound: None }
    }

    /// Computes and caches R′ for the state the next reward refers to.
    pub fn prepare_state(&mut self, state: &ChannelState, cfg: &EnvConfig) -> f64 {
        let upper = upper_bound(state, cfg);
        self.last_upper_bound = Some(upper);
        upper
    }

    pub fn cached_upper_bound(&self) -> Option<f64> {
        self.last_upper_bound
    }

    /// Emits the reward for a step. `prepare_state` must have been called
    /// for the pre-move state the report was computed on.
    pub fn emit(
        &mut self,
        s_enc: &[f64],
        a_enc: &[f64],
        report: &RateReport,
        sched: &DiffusionSchedule,
        rng: &mut impl Rng,
    ) -> Result<f64, GdmError> {
        let upper = self.last_upper_bound.unwrap_or(0.0);
        let value = match self.variant {
            RewardVariant::Raw => raw_reward(report),
            RewardVariant::Designed => designed_reward(report, upper),
            RewardVariant::DesignedMlp => {
                let base = designed_reward(report, upper);
                let shaper = self.shaper.as_ref().expect("variant owns a shaper");
                mlp_shaped_reward(s_enc, a_enc, base, shaper)?
            }
            RewardVariant::Gdm => {
                let net = self.gdm.as_ref().expect("variant owns a gdm net");
                net.generate(s_enc, a_enc, report.sum_rate, sched, rng)?
            }
            RewardVariant::DesignedGdm => {
                let net = self.gdm.as_ref().expect("variant owns a gdm net");
                designed_reward(report, upper)
                    + net.generate(s_enc, a_enc, report.sum_rate, sched, rng)?
            }
        };
        Ok(value)
    }
}
