use super::GdmError;

/// Precomputed noise-schedule tables over `P` diffusion steps.
///
/// All vectors are indexed by step `p` in `1..=P` (internally zero-based):
/// `β_p` is the per-step noise variance, `α_p = 1 − β_p`,
/// `ᾱ_p = Π_{m≤p} α_m`, and `β̃_p = ((1 − ᾱ_{p−1}) / (1 − ᾱ_p)) · β_p`
/// with `ᾱ_0 ≡ 1` (so `β̃_1 = 0`).
#[derive(Debug, Clone, PartialEq)]
pub struct DiffusionSchedule {
    betas: Vec<f64>,
    alphas: Vec<f64>,
    alpha_bars: Vec<f64>,
    beta_tildes: Vec<f64>,
}

/// Builds a linear β schedule from `beta_min` at step 1 to `beta_max` at
/// step `steps`. `steps == 0` yields the empty schedule, under which a
/// reverse chain degenerates to its Gaussian initialization.
pub fn make_schedule(steps: usize, beta_min: f64, beta_max: f64) -> Result<DiffusionSchedule, GdmError> {
    if !(beta_min > 0.0 && beta_min <= beta_max && beta_max < 1.0) {
        return Err(GdmError::InvalidSchedule(format!(
            "need 0 < beta_min <= beta_max < 1, got [{beta_min}, {beta_max}]"
        )));
    }
    let mut betas = Vec::with_capacity(steps);
    for p in 0..steps {
        let frac = if steps > 1 { p as f64 / (steps - 1) as f64 } else { 0.0 };
        betas.push(beta_min + (beta_max - beta_min) * frac);
    }
    let alphas: Vec<f64> = betas.iter().map(|b| 1.0 - b).collect();
    let mut alpha_bars = Vec::with_capacity(steps);
    let mut prod = 1.0;
    for a in &alphas {
        prod *= a;
        alpha_bars.push(prod);
    }
    let mut beta_tildes = Vec::with_capacity(steps);
    for p in 0..steps {
        let prev = if p == 0 { 1.0 } else { alpha_bars[p - 1] };
        beta_tildes.push((1.0 - prev) / (1.0 - alpha_bars[p]) * betas[p]);
    }
    Ok(DiffusionSchedule { betas, alphas, alpha_bars, beta_tildes })
}

impl DiffusionSchedule {
    pub fn steps(&self) -> usize {
        self.betas.len()
    }

    fn check(&self, p: usize) -> Result<(), GdmError> {
        if p == 0 || p > self.steps() {
            return Err(GdmError::StepOutOfRange(p, self.steps()));
        }
        Ok(())
    }

    pub fn beta(&self, p: usize) -> Result<f64, GdmError> {
        self.check(p)?;
        Ok(self.betas[p - 1])
    }

    pub fn alpha(&self, p: usize) -> Result<f64, GdmError> {
        self.check(p)?;
        Ok(self.alphas[p - 1])
    }

    /// `ᾱ_p`, with the `ᾱ_0 ≡ 1` convention.
    pub fn alpha_bar(&self, p: usize) -> Result<f64, GdmError> {
        if p == 0 {
            return Ok(1.0);
        }
        self.check(p)?;
        Ok(self.alpha_bars[p - 1])
    }

    pub fn beta_tilde(&self, p: usize) -> Result<f64, GdmError> {
        self.check(p)?;
        Ok(self.beta_tildes[p - 1])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_step_alpha_bar_is_one_minus_beta() {
        let s = make_schedule(1, 0.05, 0.3).unwrap();
        assert_eq!(s.alpha_bar(1).unwrap(), 1.0 - 0.05);
    }

    #[test]
    fn constant_beta_product() {
        let s = make_schedule(3, 0.1, 0.1).unwrap();
        assert!((s.alpha_bar(3).unwrap() - 0.729).abs() < 1e-15);
    }

    #[test]
    fn beta_tilde_matches_recurrence_recomputation() {
        // Recompute β̃ from scratch out of the stored β table only.
        let s = make_schedule(6, 1e-4, 0.2).unwrap();
        let mut bar_prev = 1.0;
        let mut bar = 1.0;
        for p in 1..=6 {
            let beta = s.beta(p).unwrap();
            bar *= 1.0 - beta;
            let expect = (1.0 - bar_prev) / (1.0 - bar) * beta;
            assert!((s.beta_tilde(p).unwrap() - expect).abs() < 1e-15, "p = {p}");
            bar_prev = bar;
        }
        assert_eq!(s.beta_tilde(1).unwrap(), 0.0);
    }

    #[test]
    fn schedule_identities_hold_exactly() {
        let s = make_schedule(6, 1e-4, 0.2).unwrap();
        for p in 1..=6 {
            assert_eq!(s.alpha(p).unwrap(), 1.0 - s.beta(p).unwrap());
            assert_eq!(
                s.alpha_bar(p).unwrap(),
                s.alpha_bar(p - 1).unwrap() * s.alpha(p).unwrap()
            );
        }
        // ᾱ strictly decreasing
        for p in 1..=6 {
            assert!(s.alpha_bar(p).unwrap() < s.alpha_bar(p - 1).unwrap());
        }
    }

    #[test]
    fn invalid_ranges_are_rejected() {
        assert!(make_schedule(4, 0.0, 0.5).is_err());
        assert!(make_schedule(4, 0.3, 0.2).is_err());
        assert!(make_schedule(4, 0.1, 1.0).is_err());
        assert!(make_schedule(0, 1e-4, 0.2).is_ok());
    }

    #[test]
    fn out_of_range_step_errors() {
        let s = make_schedule(3, 0.1, 0.2).unwrap();
        assert!(s.beta(0).is_err());
        assert!(s.beta(4).is_err());
    }
}
