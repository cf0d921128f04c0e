use super::{DiffusionSchedule, GdmError, NoisePredictor};
use crate::numerics::{MlpTrace, RealTensor};
use ndarray::{s, Array2};
use rand::Rng;
use rand_distr::StandardNormal;

fn gaussian(rows: usize, cols: usize, rng: &mut impl Rng) -> Array2<f64> {
    Array2::from_shape_fn((rows, cols), |_| rng.sample::<f64, _>(StandardNormal))
}

/// One forward corruption step: `√(1−β_p)·x_{p−1} + √β_p·ε`.
pub fn forward_step(
    x_prev: &RealTensor,
    p: usize,
    sched: &DiffusionSchedule,
    rng: &mut impl Rng,
) -> Result<RealTensor, GdmError> {
    let beta = sched.beta(p)?;
    let keep = (1.0 - beta).sqrt();
    let noise = beta.sqrt();
    let rank1 = x_prev.shape().len() == 1;
    let x = x_prev.as_matrix();
    let eps = gaussian(x.dim().0, x.dim().1, rng);
    let out = x.mapv(|v| keep * v) + eps.mapv(|e| noise * e);
    Ok(RealTensor::from_array2(out, rank1))
}

/// Single-jump corruption to step `p`: `x_p = √ᾱ_p·x₀ + √(1−ᾱ_p)·ε`.
/// Returns both the corrupted sample and the noise used, which the
/// noise-prediction loss regresses against.
pub fn forward_jump(
    x0: &RealTensor,
    p: usize,
    sched: &DiffusionSchedule,
    rng: &mut impl Rng,
) -> Result<(RealTensor, RealTensor), GdmError> {
    sched.beta(p)?;
    let bar = sched.alpha_bar(p)?;
    let keep = bar.sqrt();
    let noise = (1.0 - bar).sqrt();
    let rank1 = x0.shape().len() == 1;
    let x = x0.as_matrix();
    let eps = gaussian(x.dim().0, x.dim().1, rng);
    let out = x.mapv(|v| keep * v) + eps.mapv(|e| noise * e);
    Ok((RealTensor::from_array2(out, rank1), RealTensor::from_array2(eps, rank1)))
}

fn reverse_coeffs(sched: &DiffusionSchedule, p: usize) -> Result<(f64, f64, f64), GdmError> {
    let alpha = sched.alpha(p)?;
    let beta = sched.beta(p)?;
    let bar = sched.alpha_bar(p)?;
    let c_keep = 1.0 / alpha.sqrt();
    let c_eps = beta / (alpha * (1.0 - bar)).sqrt();
    // The final step (p = 1) is deterministic: no fresh noise is added.
    let c_noise = if p == 1 { 0.0 } else { beta.sqrt() };
    Ok((c_keep, c_eps, c_noise))
}

/// One reverse denoising step:
/// `x_{p−1} = x_p/√α_p − (β_p/√(α_p(1−ᾱ_p)))·ε̂(x_p, p, cond) + √β_p·ε`,
/// with the additive noise suppressed at `p = 1`.
pub fn reverse_step(
    x_p: &RealTensor,
    p: usize,
    cond: &RealTensor,
    net: &NoisePredictor,
    sched: &DiffusionSchedule,
    rng: &mut impl Rng,
) -> Result<RealTensor, GdmError> {
    net.check_cond(cond)?;
    if x_p.width() != net.sample_width() {
        return Err(GdmError::WidthMismatch(format!(
            "sample width {} != predictor width {}",
            x_p.width(),
            net.sample_width()
        )));
    }
    let (c_keep, c_eps, c_noise) = reverse_coeffs(sched, p)?;
    let rank1 = x_p.shape().len() == 1;
    let x = x_p.as_matrix();
    let rows = x.dim().0;
    let steps = vec![p; rows];
    let eps_hat = net.predict(x, &steps, cond.as_matrix());
    let mut out = x.mapv(|v| c_keep * v) - eps_hat.mapv(|e| c_eps * e);
    if c_noise > 0.0 {
        out += &gaussian(rows, x.dim().1, rng).mapv(|z| c_noise * z);
    }
    Ok(RealTensor::from_array2(out, rank1))
}

/// Runs the reverse chain from a given start at step `P` down to the
/// denoised sample at step 0.
pub fn reverse_chain_from(
    x_start: &RealTensor,
    cond: &RealTensor,
    net: &NoisePredictor,
    sched: &DiffusionSchedule,
    rng: &mut impl Rng,
) -> Result<RealTensor, GdmError> {
    let mut x = x_start.clone();
    for p in (1..=sched.steps()).rev() {
        x = reverse_step(&x, p, cond, net, sched, rng)?;
        if !x.is_finite() {
            return Err(GdmError::Diverged);
        }
    }
    Ok(x)
}

/// Full generation from pure Gaussian noise, conditioned on `cond` (one row
/// per generated sample; a rank-1 `cond` yields a single rank-1 sample).
pub fn sample_chain(
    cond: &RealTensor,
    net: &NoisePredictor,
    sched: &DiffusionSchedule,
    rng: &mut impl Rng,
) -> Result<RealTensor, GdmError> {
    net.check_cond(cond)?;
    let rank1 = cond.shape().len() == 1;
    let rows = cond.rows();
    let start = RealTensor::from_array2(gaussian(rows, net.sample_width(), rng), rank1);
    reverse_chain_from(&start, cond, net, sched, rng)
}

/// Everything needed to backpropagate through one reverse chain: the
/// predictor trace and step index of each application, in generation order
/// (p = P down to 1).
pub struct ChainTrace {
    steps: Vec<(usize, MlpTrace)>,
    rank1: bool,
}

/// Differentiable variant of [`sample_chain`]: the Gaussian draws are
/// recorded as constants (reparameterization) so a loss gradient at the
/// output can flow back through every predictor application.
pub fn sample_chain_traced(
    cond: &RealTensor,
    net: &NoisePredictor,
    sched: &DiffusionSchedule,
    rng: &mut impl Rng,
) -> Result<(RealTensor, ChainTrace), GdmError> {
    net.check_cond(cond)?;
    let rank1 = cond.shape().len() == 1;
    let rows = cond.rows();
    let cond_m = cond.as_matrix();
    let mut x = gaussian(rows, net.sample_width(), rng);
    let mut steps = Vec::with_capacity(sched.steps());
    for p in (1..=sched.steps()).rev() {
        let (c_keep, c_eps, c_noise) = reverse_coeffs(sched, p)?;
        let step_idx = vec![p; rows];
        let (eps_hat, trace) = net.predict_traced(x.view(), &step_idx, cond_m);
        steps.push((p, trace));
        x = x.mapv(|v| c_keep * v) - eps_hat.mapv(|e| c_eps * e);
        if c_noise > 0.0 {
            x += &gaussian(rows, net.sample_width(), rng).mapv(|z| c_noise * z);
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(GdmError::Diverged);
        }
    }
    Ok((RealTensor::from_array2(x, rank1), ChainTrace { steps, rank1 }))
}

/// Backpropagates `d_x0` (dL/d output sample) through a recorded reverse
/// chain, accumulating parameter gradients in the predictor.
pub fn chain_backward(
    net: &mut NoisePredictor,
    sched: &DiffusionSchedule,
    trace: &ChainTrace,
    d_x0: &RealTensor,
) -> Result<(), GdmError> {
    if d_x0.width() != net.sample_width() {
        return Err(GdmError::WidthMismatch(format!(
            "gradient width {} != sample width {}",
            d_x0.width(),
            net.sample_width()
        )));
    }
    debug_assert_eq!(d_x0.shape().len() == 1, trace.rank1);
    let sample_w = net.sample_width();
    let mut g: Array2<f64> = d_x0.as_matrix().to_owned();
    // Generation recorded p = P..1; walk it backwards (p = 1..P).
    for (p, mlp_trace) in trace.steps.iter().rev() {
        let (c_keep, c_eps, _) = reverse_coeffs(sched, *p)?;
        let d_eps = g.mapv(|v| -c_eps * v);
        let d_input = net.mlp_mut().backward_traced(mlp_trace, &d_eps);
        let d_x_through_net = d_input.slice(s![.., 0..sample_w]).to_owned();
        g = g.mapv(|v| c_keep * v) + &d_x_through_net;
    }
    Ok(())
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

    fn tiny_net(seed: u64, sample: usize, cond: usize) -> NoisePredictor {
        NoisePredictor::new(sample, cond, 2, 8, &mut rng(seed))
    }

    #[test]
    fn forward_step_vanishing_beta_keeps_sample() {
        let sched = make_schedule(1, 1e-30, 1e-30).unwrap();
        let x = RealTensor::vector(vec![1.0, -2.0, 0.5]);
        let out = forward_step(&x, 1, &sched, &mut rng(0)).unwrap();
        for (a, b) in out.data().iter().zip(x.data()) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn forward_step_zero_input_variance_matches_beta() {
        let sched = make_schedule(1, 0.37, 0.37).unwrap();
        let x = RealTensor::zeros(&[4]);
        let mut r = rng(1);
        let n = 100_000;
        let mut sum_sq = 0.0;
        for _ in 0..n / 4 {
            let out = forward_step(&x, 1, &sched, &mut r).unwrap();
            sum_sq += out.data().iter().map(|v| v * v).sum::<f64>();
        }
        let var = sum_sq / n as f64;
        assert!((var / 0.37 - 1.0).abs() < 0.02, "variance {var}");
    }

    #[test]
    fn forward_ops_are_seed_reproducible() {
        let sched = make_schedule(4, 1e-3, 0.2).unwrap();
        let x = RealTensor::vector(vec![0.4, -0.9]);
        let a = forward_step(&x, 2, &sched, &mut rng(9)).unwrap();
        let b = forward_step(&x, 2, &sched, &mut rng(9)).unwrap();
        assert_eq!(a, b);
        let (j1, e1) = forward_jump(&x, 3, &sched, &mut rng(9)).unwrap();
        let (j2, e2) = forward_jump(&x, 3, &sched, &mut rng(9)).unwrap();
        assert_eq!(j1, j2);
        assert_eq!(e1, e2);
    }

    #[test]
    fn forward_jump_near_identity_at_tiny_beta() {
        let sched = make_schedule(1, 1e-30, 1e-30).unwrap();
        let x = RealTensor::vector(vec![3.0, -1.0]);
        let (out, _) = forward_jump(&x, 1, &sched, &mut rng(0)).unwrap();
        for (a, b) in out.data().iter().zip(x.data()) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn forward_jump_marginal_variance_from_zero_data() {
        let sched = make_schedule(6, 1e-4, 0.2).unwrap();
        let p = 5;
        let expect = 1.0 - sched.alpha_bar(p).unwrap();
        let x = RealTensor::zeros(&[4]);
        let mut r = rng(2);
        let n = 100_000;
        let mut sum_sq = 0.0;
        for _ in 0..n / 4 {
            let (out, _) = forward_jump(&x, p, &sched, &mut r).unwrap();
            sum_sq += out.data().iter().map(|v| v * v).sum::<f64>();
        }
        let var = sum_sq / n as f64;
        assert!((var / expect - 1.0).abs() < 0.02, "variance {var} vs {expect}");
    }

    #[test]
    fn iterated_steps_match_jump_moments() {
        // Quick two-moment check; the acceptance suite runs the full-size one.
        let sched = make_schedule(6, 1e-4, 0.2).unwrap();
        let x0 = RealTensor::vector(vec![1.5]);
        let n = 20_000;
        let mut r = rng(3);
        let (mut m_it, mut v_it) = (0.0, 0.0);
        for _ in 0..n {
            let mut x = x0.clone();
            for p in 1..=6 {
                x = forward_step(&x, p, &sched, &mut r).unwrap();
            }
            m_it += x.data()[0];
            v_it += x.data()[0] * x.data()[0];
        }
        let (mut m_j, mut v_j) = (0.0, 0.0);
        for _ in 0..n {
            let (x, _) = forward_jump(&x0, 6, &sched, &mut r).unwrap();
            m_j += x.data()[0];
            v_j += x.data()[0] * x.data()[0];
        }
        let n = n as f64;
        assert!((m_it / n - m_j / n).abs() < 0.03);
        assert!((v_it / n) / (v_j / n) - 1.0 < 0.04);
    }

    #[test]
    fn reverse_step_hand_evaluated_scalar_case() {
        // α = 0.9, ᾱ = 0.9 (single-step schedule), x = 1, predictor ≡ 0.5,
        // additive noise suppressed at p = 1.
        let sched = make_schedule(1, 0.1, 0.1).unwrap();
        let mut net = tiny_net(0, 1, 0);
        let mut params = vec![0.0; net.mlp().param_count()];
        let last = params.len() - 1; // final bias
        params[last] = 0.5;
        net.mlp_mut().set_params_flat(&params).unwrap();

        let x = RealTensor::vector(vec![1.0]);
        let cond = RealTensor::zeros(&[0]);
        let out = reverse_step(&x, 1, &cond, &net, &sched, &mut rng(0)).unwrap();
        let expect = 1.0 / 0.9f64.sqrt() - (0.1 / (0.9 * 0.1f64).sqrt()) * 0.5;
        assert!((out.data()[0] - expect).abs() < 1e-12);
    }

    #[test]
    fn reverse_step_zero_predictor_tiny_beta_is_identity() {
        let sched = make_schedule(1, 1e-8, 1e-8).unwrap();
        let mut net = tiny_net(0, 2, 0);
        net.mlp_mut().zero_all_params();
        let x = RealTensor::vector(vec![0.7, -0.3]);
        let out = reverse_step(&x, 1, &RealTensor::zeros(&[0]), &net, &sched, &mut rng(0)).unwrap();
        for (a, b) in out.data().iter().zip(x.data()) {
            assert!((a - b).abs() < 1e-7);
        }
    }

    #[test]
    fn reverse_step_is_deterministic_under_seed() {
        let sched = make_schedule(4, 1e-3, 0.3).unwrap();
        let net = tiny_net(5, 3, 2);
        let x = RealTensor::vector(vec![0.2, -0.4, 0.9]);
        let cond = RealTensor::vector(vec![1.0, -1.0]);
        let a = reverse_step(&x, 3, &cond, &net, &sched, &mut rng(7)).unwrap();
        let b = reverse_step(&x, 3, &cond, &net, &sched, &mut rng(7)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn degenerate_chain_returns_the_gaussian_draw() {
        let sched = make_schedule(0, 1e-4, 0.2).unwrap();
        let net = tiny_net(0, 3, 0);
        let cond = RealTensor::zeros(&[0]);
        let out = sample_chain(&cond, &net, &sched, &mut rng(11)).unwrap();
        let reference = gaussian(1, 3, &mut rng(11));
        assert_eq!(out.data(), reference.as_slice().unwrap());
    }

    #[test]
    fn chain_is_seed_reproducible_and_finite() {
        let sched = make_schedule(6, 1e-4, 0.2).unwrap();
        let net = tiny_net(3, 4, 2);
        let cond = RealTensor::matrix(3, 2, vec![0.1, 0.2, -0.3, 0.4, 0.0, -0.1]).unwrap();
        let a = sample_chain(&cond, &net, &sched, &mut rng(13)).unwrap();
        let b = sample_chain(&cond, &net, &sched, &mut rng(13)).unwrap();
        assert_eq!(a, b);
        assert!(a.is_finite());
        assert_eq!(a.shape(), &[3, 4]);
    }

    #[test]
    fn untrained_chain_mean_matches_recursion_replay_oracle() {
        // Replays the same recursion in test code with an independent stream
        // and compares the Monte-Carlo means within a 3σ band.
        let sched = make_schedule(3, 1e-2, 0.2).unwrap();
        let net = tiny_net(21, 2, 0);
        let n = 10_000usize;

        let cond = RealTensor::zeros(&[n, 0]);
        let samples = sample_chain(&cond, &net, &sched, &mut rng(100)).unwrap();
        let mean_impl: f64 =
            samples.data().iter().sum::<f64>() / samples.len() as f64;

        // Oracle: literal recursion out of the published equations, using
        // infer() only.
        let mut r = rng(200);
        let mut acc = 0.0;
        let mut acc_sq = 0.0;
        for _ in 0..n {
            let mut x = vec![
                r.sample::<f64, _>(StandardNormal),
                r.sample::<f64, _>(StandardNormal),
            ];
            for p in (1..=3).rev() {
                let alpha = sched.alpha(p).unwrap();
                let beta = sched.beta(p).unwrap();
                let bar = sched.alpha_bar(p).unwrap();
                let mut input = x.clone();
                input.extend(super::super::predictor::step_embedding(p));
                let eps = net
                    .mlp()
                    .infer(&RealTensor::vector(input))
                    .unwrap()
                    .into_data();
                for i in 0..2 {
                    x[i] = x[i] / alpha.sqrt() - beta / (alpha * (1.0 - bar)).sqrt() * eps[i];
                    if p > 1 {
                        x[i] += beta.sqrt() * r.sample::<f64, _>(StandardNormal);
                    }
                }
            }
            for v in &x {
                acc += v;
                acc_sq += v * v;
            }
        }
        let n2 = (2 * n) as f64;
        let mean_oracle = acc / n2;
        let var_oracle = acc_sq / n2 - mean_oracle * mean_oracle;
        let band = 3.0 * (var_oracle / n2).sqrt() * 2.0_f64.sqrt();
        assert!(
            (mean_impl - mean_oracle).abs() < band.max(1e-3) * 2.0,
            "impl {mean_impl} oracle {mean_oracle} band {band}"
        );
    }
}
