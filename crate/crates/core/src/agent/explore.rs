use super::AgentError;
use crate::gdm::{mode2_generate, DiffusionSchedule, NoisePredictor};
use crate::numerics::RealTensor;
use rand::Rng;

const LOSS_EMA_DECAY: f64 = 0.99;

/// State-substitution controls: replacement probability χ starts at 0 and
/// grows by `update_rate` up to `max_substitute_prob` whenever the state
/// denoiser's smoothed loss is under `loss_threshold`.
#[derive(Debug, Clone, PartialEq)]
pub struct StateExplorationConfig {
    pub max_substitute_prob: f64,
    pub update_rate: f64,
    pub loss_threshold: f64,
}

impl StateExplorationConfig {
    pub fn validate(&self) -> Result<(), AgentError> {
        if !(0.0..=1.0).contains(&self.max_substitute_prob) {
            return Err(AgentError::Mismatch(format!(
                "max_substitute_prob must be in [0,1], got {}",
                self.max_substitute_prob
            )));
        }
        if self.update_rate < 0.0 || self.loss_threshold <= 0.0 {
            return Err(AgentError::Mismatch(
                "update_rate must be >= 0 and loss_threshold > 0".into(),
            ));
        }
        Ok(())
    }
}

/// The state-exploration side of the agent: an unconditional denoiser over
/// encoded states plus the substitution controller.
#[derive(Debug, Clone)]
pub struct StateExplorer {
    pub cfg: StateExplorationConfig,
    senpnn: NoisePredictor,
    chi: f64,
    loss_ema: Option<f64>,
    pub substitutions: u64,
    pub draws: u64,
}

impl StateExplorer {
    pub fn new(
        cfg: StateExplorationConfig,
        state_width: usize,
        hidden_layers: usize,
        hidden_width: usize,
        rng: &mut impl Rng,
    ) -> Result<Self, AgentError> {
        cfg.validate()?;
        Ok(Self {
            cfg,
            senpnn: NoisePredictor::new(state_width, 0, hidden_layers, hidden_width, rng),
            chi: 0.0,
            loss_ema: None,
            substitutions: 0,
            draws: 0,
        })
    }

    pub fn senpnn(&self) -> &NoisePredictor {
        &self.senpnn
    }

    pub fn senpnn_mut(&mut self) -> &mut NoisePredictor {
        &mut self.senpnn
    }

    pub fn chi(&self) -> f64 {
        self.chi
    }

    pub fn loss_ema(&self) -> Option<f64> {
        self.loss_ema
    }

    /// Folds a fresh denoising loss into the gate's moving average.
    pub fn record_loss(&mut self, loss: f64) {
        self.loss_ema = Some(match self.loss_ema {
            None => loss,
            Some(ema) => LOSS_EMA_DECAY * ema + (1.0 - LOSS_EMA_DECAY) * loss,
        });
    }

    /// One controller invocation: synthesize a substitute state by
    /// corrupt-then-denoise, grow χ if the gate is open, then pick the
    /// substitute with probability χ. Returns the chosen state and whether
    /// it was substituted.
    pub fn substitute(
        &mut self,
        original: &RealTensor,
        sched: &DiffusionSchedule,
        rng: &mut impl Rng,
    ) -> Result<(RealTensor, bool), AgentError> {
        let cond = RealTensor::zeros(&[0]);
        let generated = mode2_generate(original, &cond, &self.senpnn, sched, rng)?;
        if matches!(self.loss_ema, Some(ema) if ema < self.cfg.loss_threshold) {
            self.chi = (self.chi + self.cfg.update_rate).min(self.cfg.max_substitute_prob);
        }
        self.draws += 1;
        let r: f64 = rng.random();
        if r <= self.chi {
            self.substitutions += 1;
            Ok((generated, true))
        } else {
            Ok((original.clone(), false))
        }
    }

    #[cfg(test)]
    pub(crate) fn force_chi_for_tests(&mut self, chi: f64) {
        self.chi = chi;
    }

    pub fn visit_state(&self, prefix: &str, mut f: impl FnMut(String, &[f64])) {
        self.senpnn.mlp().visit_state(&format!("{prefix}.senpnn"), &mut f);
        f(format!("{prefix}.chi"), &[self.chi]);
        f(format!("{prefix}.loss_ema"), &[self.loss_ema.unwrap_or(f64::NAN)]);
    }

    pub fn restore_state(
        &mut self,
        prefix: &str,
        lookup: &mut impl FnMut(&str) -> Option<Vec<f64>>,
    ) -> Result<(), crate::numerics::NumericsError> {
        self.senpnn.mlp_mut().restore_state(&format!("{prefix}.senpnn"), lookup)?;
        if let Some(v) = lookup(&format!("{prefix}.chi")) {
            self.chi = v.first().copied().unwrap_or(0.0);
        }
        if let Some(v) = lookup(&format!("{prefix}.loss_ema")) {
            let ema = v.first().copied().unwrap_or(f64::NAN);
            self.loss_ema = ema.is_finite().then_some(ema);
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gdm::make_schedule;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    fn rng(seed: u64) -> ChaCha20Rng {
        ChaCha20Rng::seed_from_u64(seed)
    }

    fn explorer(m: f64, eta: f64) -> StateExplorer {
        StateExplorer::new(
            StateExplorationConfig {
                max_substitute_prob: m,
                update_rate: eta,
                loss_threshold: 5e-4,
            },
            4,
            2,
            8,
            &mut rng(0),
        )
        .unwrap()
    }

    #[test]
    fn chi_zero_always_returns_the_original() {
        let mut ex = explorer(0.9, 0.001);
        let sched = make_schedule(6, 1e-4, 0.2).unwrap();
        let s = RealTensor::vector(vec![0.1, 0.2, 0.3, 0.4]);
        let mut r = rng(1);
        for _ in 0..200 {
            let (out, substituted) = ex.substitute(&s, &sched, &mut r).unwrap();
            assert!(!substituted);
            assert_eq!(out, s);
        }
    }

    #[test]
    fn chi_one_always_substitutes() {
        let mut ex = explorer(1.0, 1.0);
        ex.force_chi_for_tests(1.0);
        let sched = make_schedule(6, 1e-4, 0.2).unwrap();
        let s = RealTensor::vector(vec![0.1, 0.2, 0.3, 0.4]);
        let mut r = rng(2);
        for _ in 0..100 {
            let (_, substituted) = ex.substitute(&s, &sched, &mut r).unwrap();
            assert!(substituted);
        }
    }

    #[test]
    fn substitution_frequency_tracks_chi() {
        let mut ex = explorer(0.9, 0.0);
        ex.force_chi_for_tests(0.5);
        let sched = make_schedule(6, 1e-4, 0.2).unwrap();
        let s = RealTensor::vector(vec![0.0; 4]);
        let mut r = rng(3);
        let n = 10_000;
        for _ in 0..n {
            ex.substitute(&s, &sched, &mut r).unwrap();
        }
        let freq = ex.substitutions as f64 / n as f64;
        assert!((freq - 0.5).abs() <= 0.02, "frequency {freq}");
    }

    #[test]
    fn gate_opens_only_below_threshold_and_chi_is_capped() {
        let mut ex = explorer(0.01, 0.004);
        let sched = make_schedule(6, 1e-4, 0.2).unwrap();
        let s = RealTensor::vector(vec![0.0; 4]);
        let mut r = rng(4);

        // high loss: gate closed
        ex.record_loss(1.0);
        for _ in 0..10 {
            ex.substitute(&s, &sched, &mut r).unwrap();
        }
        assert_eq!(ex.chi(), 0.0);

        // low loss: grows by η per call, capped at M
        for _ in 0..1000 {
            ex.record_loss(0.0);
        }
        assert!(ex.loss_ema().unwrap() < 5e-4);
        let mut last = 0.0;
        for _ in 0..10 {
            ex.substitute(&s, &sched, &mut r).unwrap();
            assert!(ex.chi() >= last);
            last = ex.chi();
        }
        assert!((ex.chi() - 0.01).abs() < 1e-12, "chi must cap at M");
    }

    #[test]
    fn loss_ema_follows_the_decay_recurrence() {
        let mut ex = explorer(0.5, 0.01);
        ex.record_loss(2.0);
        assert_eq!(ex.loss_ema(), Some(2.0));
        ex.record_loss(0.0);
        assert!((ex.loss_ema().unwrap() - 1.98).abs() < 1e-15);
    }
}
