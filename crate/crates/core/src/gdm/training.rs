use super::chain::{chain_backward, forward_jump, reverse_chain_from, sample_chain_traced};
use super::{DiffusionSchedule, GdmError, NoisePredictor};
use crate::numerics::{GradReport, RealTensor};
use ndarray::Array2;
use rand::Rng;

/// Noise-prediction loss at fixed corruption draws: with `x_p = √ᾱ_p·x₀ +
/// √(1−ᾱ_p)·ε`, returns the mean over rows of `‖ε − ε̂(x_p, p, cond)‖²`.
///
/// Deterministic given `(steps, eps)`; the stochastic wrapper
/// [`denoise_loss`] draws them. `accumulate_grads` additionally
/// backpropagates the loss into the predictor's gradient slots.
pub fn denoise_loss_at(
    x0: &RealTensor,
    cond: &RealTensor,
    steps: &[usize],
    eps: &RealTensor,
    net: &mut NoisePredictor,
    sched: &DiffusionSchedule,
    accumulate_grads: bool,
) -> Result<f64, GdmError> {
    net.check_cond(cond)?;
    if x0.width() != net.sample_width() || eps.width() != net.sample_width() {
        return Err(GdmError::WidthMismatch(format!(
            "sample width {} / noise width {} vs predictor {}",
            x0.width(),
            eps.width(),
            net.sample_width()
        )));
    }
    let rows = x0.rows();
    let x = x0.as_matrix();
    let e = eps.as_matrix();
    let mut xp = Array2::zeros((rows, net.sample_width()));
    for r in 0..rows {
        let bar = sched.alpha_bar(steps[r])?;
        let (keep, noise) = (bar.sqrt(), (1.0 - bar).sqrt());
        for c in 0..net.sample_width() {
            xp[[r, c]] = keep * x[[r, c]] + noise * e[[r, c]];
        }
    }
    let (eps_hat, trace) = net.predict_traced(xp.view(), steps, cond.as_matrix());
    let diff = &eps_hat - &e;
    let loss = diff.iter().map(|d| d * d).sum::<f64>() / rows as f64;
    if accumulate_grads {
        let d_eps_hat = diff.mapv(|d| 2.0 * d / rows as f64);
        net.mlp_mut().backward_traced(&trace, &d_eps_hat);
    }
    Ok(loss)
}

/// Stochastic noise-prediction loss: draws a uniform step index and a fresh
/// Gaussian noise per row, then evaluates [`denoise_loss_at`].
pub fn denoise_loss(
    x0: &RealTensor,
    cond: &RealTensor,
    net: &mut NoisePredictor,
    sched: &DiffusionSchedule,
    rng: &mut impl Rng,
) -> Result<f64, GdmError> {
    let (steps, eps) = draw_loss_randomness(x0, sched, rng);
    denoise_loss_at(x0, cond, &steps, &eps, net, sched, false)
}

/// One SGD step on the noise-prediction loss: draw randomness, accumulate
/// gradients, apply AdamW. Returns the loss value.
pub fn denoise_train_step(
    x0: &RealTensor,
    cond: &RealTensor,
    net: &mut NoisePredictor,
    sched: &DiffusionSchedule,
    rng: &mut impl Rng,
    learning_rate: f64,
    weight_decay: f64,
) -> Result<f64, GdmError> {
    let (steps, eps) = draw_loss_randomness(x0, sched, rng);
    net.mlp_mut().zero_grads();
    let loss = denoise_loss_at(x0, cond, &steps, &eps, net, sched, true)?;
    net.mlp_mut().adam_step(learning_rate, weight_decay)?;
    Ok(loss)
}

fn draw_loss_randomness(
    x0: &RealTensor,
    sched: &DiffusionSchedule,
    rng: &mut impl Rng,
) -> (Vec<usize>, RealTensor) {
    use rand_distr::StandardNormal;
    let rows = x0.rows();
    let steps: Vec<usize> = (0..rows).map(|_| rng.random_range(1..=sched.steps())).collect();
    let eps = Array2::from_shape_fn((rows, x0.width()), |_| rng.sample::<f64, _>(StandardNormal));
    (steps, RealTensor::from_array2(eps, x0.shape().len() == 1))
}

/// Corrupt-then-denoise generation: jump a real sample to step `P`, then run
/// the full reverse chain back to step 0.
pub fn mode2_generate(
    x0: &RealTensor,
    cond: &RealTensor,
    net: &NoisePredictor,
    sched: &DiffusionSchedule,
    rng: &mut impl Rng,
) -> Result<RealTensor, GdmError> {
    if sched.steps() == 0 {
        return Ok(x0.clone());
    }
    let (xp, _) = forward_jump(x0, sched.steps(), sched, rng)?;
    reverse_chain_from(&xp, cond, net, sched, rng)
}

#[derive(Debug, Clone)]
pub struct Mode2TrainConfig {
    pub train_steps: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub generate_count: usize,
    /// Stop early once the trailing-window mean loss drops below this.
    pub stop_loss: Option<f64>,
}

impl Default for Mode2TrainConfig {
    fn default() -> Self {
        Self {
            train_steps: 2_000,
            batch_size: 128,
            learning_rate: 1e-3,
            weight_decay: 0.0,
            generate_count: 1_000,
            stop_loss: None,
        }
    }
}

/// Fits the predictor to a dataset with the noise-prediction loss, then
/// synthesizes new samples by corrupt-then-denoise over random dataset rows.
/// Returns `(generated samples, final training loss)`.
pub fn mode2_train_and_generate(
    dataset: &RealTensor,
    cond: &RealTensor,
    net: &mut NoisePredictor,
    sched: &DiffusionSchedule,
    rng: &mut impl Rng,
    cfg: &Mode2TrainConfig,
) -> Result<(RealTensor, f64), GdmError> {
    let n = dataset.rows();
    if n == 0 {
        return Err(GdmError::WidthMismatch("empty dataset".into()));
    }
    if cond.rows() != n {
        return Err(GdmError::WidthMismatch(format!(
            "conditioning rows {} != dataset rows {n}",
            cond.rows()
        )));
    }
    let w = dataset.width();
    let cw = cond.width();
    let mut loss = f64::NAN;
    let window = 25;
    let mut recent = std::collections::VecDeque::with_capacity(window);
    for _ in 0..cfg.train_steps {
        let batch = cfg.batch_size.min(n);
        let mut bx = Vec::with_capacity(batch * w);
        let mut bc = Vec::with_capacity(batch * cw);
        for _ in 0..batch {
            let i = rng.random_range(0..n);
            bx.extend_from_slice(dataset.row(i));
            bc.extend_from_slice(cond.row(i));
        }
        let bx = RealTensor::matrix(batch, w, bx)?;
        let bc = RealTensor::matrix(batch, cw, bc)?;
        loss = denoise_train_step(&bx, &bc, net, sched, rng, cfg.learning_rate, cfg.weight_decay)?;
        if let Some(target) = cfg.stop_loss {
            if recent.len() == window {
                recent.pop_front();
            }
            recent.push_back(loss);
            if recent.len() == window
                && recent.iter().sum::<f64>() / window as f64 <= target
            {
                break;
            }
        }
    }

    let mut gx = Vec::with_capacity(cfg.generate_count * w);
    let mut gc = Vec::with_capacity(cfg.generate_count * cw);
    for _ in 0..cfg.generate_count {
        let i = rng.random_range(0..n);
        gx.extend_from_slice(dataset.row(i));
        gc.extend_from_slice(cond.row(i));
    }
    let gx = RealTensor::matrix(cfg.generate_count, w, gx)?;
    let gc = RealTensor::matrix(cfg.generate_count, cw, gc)?;
    let generated = mode2_generate(&gx, &gc, net, sched, rng)?;
    Ok((generated, loss))
}

/// A differentiable scalar objective over generated samples: returns one
/// value per row and the gradient of the summed objective with respect to
/// each sample entry.
pub trait CriticHook {
    fn value_and_grad(&mut self, samples: &RealTensor) -> (Vec<f64>, RealTensor);
}

impl<F> CriticHook for F
where
    F: FnMut(&RealTensor) -> (Vec<f64>, RealTensor),
{
    fn value_and_grad(&mut self, samples: &RealTensor) -> (Vec<f64>, RealTensor) {
        self(samples)
    }
}

#[derive(Debug, Clone)]
pub struct Mode1Report {
    /// Mean objective value over the generated batch.
    pub mean_value: f64,
    /// Per-layer gradient sums of the predictor after backprop (zeroed when
    /// the step was skipped).
    pub grad_report: GradReport,
    /// True when a non-finite objective or gradient aborted the update.
    pub skipped: bool,
}

/// One critic-guided policy-gradient step: generate via the differentiable
/// reverse chain, score with the critic hook, and descend `−mean(Q)` through
/// the whole chain into the predictor.
pub fn mode1_policy_grad_step(
    cond: &RealTensor,
    net: &mut NoisePredictor,
    sched: &DiffusionSchedule,
    critic: &mut dyn CriticHook,
    rng: &mut impl Rng,
    learning_rate: f64,
    weight_decay: f64,
) -> Result<Mode1Report, GdmError> {
    let layers = net.mlp().num_layers();
    let (x0, trace) = sample_chain_traced(cond, net, sched, rng)?;
    let rows = x0.rows() as f64;
    let (values, dq) = critic.value_and_grad(&x0);
    let mean_value = values.iter().sum::<f64>() / rows;
    if !mean_value.is_finite() || !dq.is_finite() {
        return Ok(Mode1Report {
            mean_value,
            grad_report: GradReport::zeros(layers),
            skipped: true,
        });
    }
    // loss = -mean(Q)  =>  dL/dx0 = -(1/B) dQ/dx0
    let mut d_x0 = dq;
    for v in d_x0.data_mut() {
        *v = -*v / rows;
    }
    net.mlp_mut().zero_grads();
    chain_backward(net, sched, &trace, &d_x0)?;
    let grad_report = net.mlp().grad_report();
    match net.mlp_mut().adam_step(learning_rate, weight_decay) {
        Ok(()) => Ok(Mode1Report { mean_value, grad_report, skipped: false }),
        Err(crate::numerics::NumericsError::NonFiniteGradient) => Ok(Mode1Report {
            mean_value,
            grad_report: GradReport::zeros(layers),
            skipped: true,
        }),
        Err(e) => Err(e.into()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gdm::make_schedule;
    use crate::numerics::{central_diff_grad, max_rel_err};
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    fn rng(seed: u64) -> ChaCha20Rng {
        ChaCha20Rng::seed_from_u64(seed)
    }

    #[test]
    fn exact_predictor_gives_zero_loss() {
        // With x0 = 0 and a single-step schedule, ε = x_p / √(1−ᾱ₁): a
        // hand-built linear predictor recovers it exactly.
        let sched = make_schedule(1, 0.36, 0.36).unwrap();
        let mut net = NoisePredictor::new(2, 0, 0, 0, &mut rng(0));
        // widths collapse to [2+8, 2]: single linear layer.
        let scale = 1.0 / (1.0 - sched.alpha_bar(1).unwrap()).sqrt();
        let mut params = vec![0.0; net.mlp().param_count()];
        // w is 2 x 10 row-major; identity*scale on the sample columns.
        params[0] = scale; // w[0][0]
        params[11] = scale; // w[1][1]
        net.mlp_mut().set_params_flat(&params).unwrap();

        let x0 = RealTensor::matrix(4, 2, vec![0.0; 8]).unwrap();
        let cond = RealTensor::zeros(&[4, 0]);
        let loss = denoise_loss(&x0, &cond, &mut net, &sched, &mut rng(5)).unwrap();
        assert!(loss < 1e-24, "loss {loss}");
    }

    #[test]
    fn zero_predictor_loss_is_chi_square_mean() {
        // ε̂ ≡ 0 ⇒ loss = ‖ε‖² with E = sample width.
        let sched = make_schedule(6, 1e-4, 0.2).unwrap();
        let mut net = NoisePredictor::new(3, 0, 2, 8, &mut rng(1));
        net.mlp_mut().zero_all_params();
        let mut r = rng(2);
        let n = 10_000;
        let x0 = RealTensor::matrix(n, 3, vec![0.7; 3 * n]).unwrap();
        let cond = RealTensor::zeros(&[n, 0]);
        let loss = denoise_loss(&x0, &cond, &mut net, &sched, &mut r).unwrap();
        assert!((loss / 3.0 - 1.0).abs() < 0.05, "loss {loss}");
    }

    #[test]
    fn denoise_loss_gradient_matches_central_differences() {
        let sched = make_schedule(4, 1e-3, 0.25).unwrap();
        let mut net = NoisePredictor::new(2, 1, 2, 6, &mut rng(3));
        let x0 = RealTensor::matrix(3, 2, vec![0.4, -0.2, 1.1, 0.3, -0.6, 0.9]).unwrap();
        let cond = RealTensor::matrix(3, 1, vec![0.5, -0.5, 0.1]).unwrap();
        let steps = vec![1, 3, 4];
        let eps = RealTensor::matrix(3, 2, vec![0.3, -1.2, 0.8, 0.1, -0.4, 0.6]).unwrap();

        net.mlp_mut().zero_grads();
        denoise_loss_at(&x0, &cond, &steps, &eps, &mut net, &sched, true).unwrap();
        let analytic = net.mlp().grads_flat();

        let theta = net.mlp().params_flat();
        let mut probe = net.clone();
        let mut f = |p: &[f64]| {
            probe.mlp_mut().set_params_flat(p).unwrap();
            denoise_loss_at(&x0, &cond, &steps, &eps, &mut probe, &sched, false).unwrap()
        };
        let numeric = central_diff_grad(&mut f, &theta, 1e-5);
        assert!(max_rel_err(&analytic, &numeric, 1e-6) < 1e-4);
    }

    #[test]
    fn mode2_fits_a_degenerate_distribution() {
        let sched = make_schedule(6, 1e-4, 0.2).unwrap();
        let mut net = NoisePredictor::new(1, 0, 2, 32, &mut rng(4));
        let dataset = RealTensor::matrix(256, 1, vec![0.0; 256]).unwrap();
        let cond = RealTensor::zeros(&[256, 0]);
        let cfg = Mode2TrainConfig {
            train_steps: 12_000,
            batch_size: 64,
            learning_rate: 3e-3,
            weight_decay: 0.0,
            generate_count: 400,
            stop_loss: Some(8e-4),
        };
        let (generated, loss) =
            mode2_train_and_generate(&dataset, &cond, &mut net, &sched, &mut rng(5), &cfg).unwrap();
        assert!(loss < 1e-3, "final loss {loss}");
        let mean = generated.data().iter().sum::<f64>() / generated.len() as f64;
        assert!(mean.abs() < 0.1, "generated mean {mean}");
    }

    #[test]
    fn mode2_untrained_net_still_produces_finite_samples() {
        let sched = make_schedule(6, 1e-4, 0.2).unwrap();
        let net = NoisePredictor::new(3, 0, 2, 8, &mut rng(6));
        let x0 = RealTensor::matrix(5, 3, vec![0.2; 15]).unwrap();
        let cond = RealTensor::zeros(&[5, 0]);
        let out = mode2_generate(&x0, &cond, &net, &sched, &mut rng(7)).unwrap();
        assert_eq!(out.shape(), &[5, 3]);
        assert!(out.is_finite());
    }

    struct NegNormSq;
    impl CriticHook for NegNormSq {
        fn value_and_grad(&mut self, samples: &RealTensor) -> (Vec<f64>, RealTensor) {
            let values = (0..samples.rows())
                .map(|r| -samples.row(r).iter().map(|v| v * v).sum::<f64>())
                .collect();
            let mut grad = samples.clone();
            for v in grad.data_mut() {
                *v = -2.0 * *v;
            }
            (values, grad)
        }
    }

    #[test]
    fn mode1_shrinks_sample_norm_under_concave_objective() {
        let sched = make_schedule(4, 1e-3, 0.2).unwrap();
        let mut net = NoisePredictor::new(2, 0, 2, 16, &mut rng(8));
        let cond = RealTensor::zeros(&[64, 0]);
        let mut r = rng(9);
        let mut first = 0.0;
        let mut last = 0.0;
        for step in 0..300 {
            let report =
                mode1_policy_grad_step(&cond, &mut net, &sched, &mut NegNormSq, &mut r, 3e-3, 0.0)
                    .unwrap();
            assert!(!report.skipped);
            if step < 25 {
                first += -report.mean_value;
            }
            if step >= 275 {
                last += -report.mean_value;
            }
        }
        assert!(
            last < 0.5 * first,
            "mean ‖x‖² did not shrink: first {first} last {last}"
        );
    }

    struct ConstantCritic;
    impl CriticHook for ConstantCritic {
        fn value_and_grad(&mut self, samples: &RealTensor) -> (Vec<f64>, RealTensor) {
            let mut grad = samples.clone();
            for v in grad.data_mut() {
                *v = 0.0;
            }
            (vec![7.25; samples.rows()], grad)
        }
    }

    #[test]
    fn mode1_constant_critic_has_zero_gradient() {
        let sched = make_schedule(3, 1e-3, 0.2).unwrap();
        let mut net = NoisePredictor::new(2, 1, 2, 8, &mut rng(10));
        let cond = RealTensor::matrix(8, 1, vec![0.3; 8]).unwrap();
        let report = mode1_policy_grad_step(
            &cond,
            &mut net,
            &sched,
            &mut ConstantCritic,
            &mut rng(11),
            1e-3,
            0.0,
        )
        .unwrap();
        assert!(report.grad_report.total_weight() + report.grad_report.total_bias() < 1e-8);
    }

    #[test]
    fn mode1_gradient_through_short_chain_matches_central_differences() {
        // Deterministic objective: reseed the chain identically per probe so
        // the loss is a pure function of the parameters.
        let sched = make_schedule(2, 5e-2, 0.2).unwrap();
        let net0 = NoisePredictor::new(2, 1, 1, 5, &mut rng(12));
        let cond = RealTensor::matrix(3, 1, vec![0.2, -0.7, 0.5]).unwrap();
        let seed = 77;

        let mut loss_of = |params: &[f64]| -> f64 {
            let mut net = net0.clone();
            net.mlp_mut().set_params_flat(params).unwrap();
            let (x0, _) = sample_chain_traced(&cond, &net, &sched, &mut rng(seed)).unwrap();
            let (values, _) = NegNormSq.value_and_grad(&x0);
            -values.iter().sum::<f64>() / values.len() as f64
        };

        let theta = net0.mlp().params_flat();
        let numeric = central_diff_grad(&mut loss_of, &theta, 1e-5);

        let mut net = net0.clone();
        let (x0, trace) = sample_chain_traced(&cond, &net, &sched, &mut rng(seed)).unwrap();
        let (_, dq) = NegNormSq.value_and_grad(&x0);
        let mut d_x0 = dq;
        for v in d_x0.data_mut() {
            *v = -*v / 3.0;
        }
        net.mlp_mut().zero_grads();
        chain_backward(&mut net, &sched, &trace, &d_x0).unwrap();
        let analytic = net.mlp().grads_flat();

        assert!(max_rel_err(&analytic, &numeric, 1e-6) < 1e-3);
    }

    struct NanCritic;
    impl CriticHook for NanCritic {
        fn value_and_grad(&mut self, samples: &RealTensor) -> (Vec<f64>, RealTensor) {
            let grad = samples.clone();
            (vec![f64::NAN; samples.rows()], grad)
        }
    }

    #[test]
    fn mode1_skips_on_non_finite_objective() {
        let sched = make_schedule(2, 1e-2, 0.2).unwrap();
        let mut net = NoisePredictor::new(2, 0, 1, 4, &mut rng(13));
        let before = net.mlp().params_flat();
        let cond = RealTensor::zeros(&[4, 0]);
        let report = mode1_policy_grad_step(
            &cond,
            &mut net,
            &sched,
            &mut NanCritic,
            &mut rng(14),
            1e-3,
            0.0,
        )
        .unwrap();
        assert!(report.skipped);
        assert_eq!(net.mlp().params_flat(), before);
    }
}
