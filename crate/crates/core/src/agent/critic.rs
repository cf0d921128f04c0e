use super::AgentError;
use crate::numerics::{Activation, GradReport, Mlp, RealTensor};
use ndarray::Array2;
use rand::Rng;

/// Double critic with target copies: two independent Q-networks over
/// `[S | A]`, whose elementwise minimum provides the conservative value
/// estimate for both the TD target and the actor's objective.
#[derive(Debug, Clone)]
pub struct CriticPair {
    q1: Mlp,
    q2: Mlp,
    t1: Mlp,
    t2: Mlp,
    input_width: usize,
}

/// TD regression targets plus the per-element target values that produced
/// them, retained so callers can audit the min rule.
#[derive(Debug, Clone)]
pub struct TargetAudit {
    pub targets: Vec<f64>,
    pub t1_values: Vec<f64>,
    pub t2_values: Vec<f64>,
}

impl CriticPair {
    /// `input_width` covers the concatenated `[S | A | feature]` rows the
    /// caller assembles.
    pub fn new(
        input_width: usize,
        hidden_layers: usize,
        hidden_width: usize,
        rng: &mut impl Rng,
    ) -> Self {
        let mut widths = vec![input_width];
        widths.extend(std::iter::repeat(hidden_width).take(hidden_layers));
        widths.push(1);
        let q1 = Mlp::new(&widths, Activation::Silu, Activation::Identity, rng);
        let q2 = Mlp::new(&widths, Activation::Silu, Activation::Identity, rng);
        let t1 = q1.clone();
        let t2 = q2.clone();
        Self { q1, q2, t1, t2, input_width }
    }

    pub fn input_width(&self) -> usize {
        self.input_width
    }

    pub fn q1(&self) -> &Mlp {
        &self.q1
    }

    pub fn q2(&self) -> &Mlp {
        &self.q2
    }

    fn scalar_column(values: RealTensor) -> Vec<f64> {
        values.into_data()
    }

    /// Online `min(Q₁, Q₂)` for a batch of `[S | A]` rows.
    pub fn min_value(&self, inputs: &RealTensor) -> Result<Vec<f64>, AgentError> {
        let v1 = Self::scalar_column(self.q1.infer(inputs)?);
        let v2 = Self::scalar_column(self.q2.infer(inputs)?);
        Ok(v1.into_iter().zip(v2).map(|(a, b)| a.min(b)).collect())
    }

    /// TD targets `y_j = r_j + γ·(1−done_j)·min(Q̂₁, Q̂₂)(S′_j, Â′_j)`.
    pub fn targets(
        &self,
        next_inputs: &RealTensor,
        rewards: &[f64],
        dones: &[bool],
        gamma: f64,
    ) -> Result<TargetAudit, AgentError> {
        let t1_values = Self::scalar_column(self.t1.infer(next_inputs)?);
        let t2_values = Self::scalar_column(self.t2.infer(next_inputs)?);
        let targets = rewards
            .iter()
            .zip(dones)
            .zip(t1_values.iter().zip(&t2_values))
            .map(|((r, done), (a, b))| {
                let bootstrap = if *done { 0.0 } else { gamma * a.min(*b) };
                r + bootstrap
            })
            .collect();
        Ok(TargetAudit { targets, t1_values, t2_values })
    }

    /// One mean-squared TD regression step per critic. Returns
    /// `(loss₁, loss₂, report₁, report₂)`.
    pub fn update(
        &mut self,
        inputs: &RealTensor,
        targets: &[f64],
        learning_rate: f64,
        weight_decay: f64,
    ) -> Result<(f64, f64, GradReport, GradReport), AgentError> {
        let rows = inputs.rows();
        debug_assert_eq!(rows, targets.len());
        let step = |net: &mut Mlp| -> Result<(f64, GradReport), AgentError> {
            net.zero_grads();
            let pred = net.forward(inputs)?;
            let mut loss = 0.0;
            let grad: Vec<f64> = (0..rows)
                .map(|r| {
                    let d = pred.row(r)[0] - targets[r];
                    loss += d * d;
                    2.0 * d / rows as f64
                })
                .collect();
            let report = net.backward(&RealTensor::matrix(rows, 1, grad)?)?;
            net.adam_step(learning_rate, weight_decay)?;
            Ok((loss / rows as f64, report))
        };
        let (l1, r1) = step(&mut self.q1)?;
        let (l2, r2) = step(&mut self.q2)?;
        Ok((l1, l2, r1, r2))
    }

    /// Values and input gradients of `min(Q₁, Q₂)` over a batch of
    /// `[S | A]` rows (the gradient follows the active critic per row).
    /// Leaves stray parameter gradients behind; callers zero them via
    /// [`CriticPair::zero_grads`].
    pub fn min_value_and_input_grad(
        &mut self,
        inputs: &RealTensor,
    ) -> Result<(Vec<f64>, Array2<f64>), AgentError> {
        let rows = inputs.rows();
        let x = inputs.as_matrix();
        let (v1, tr1) = self.q1.forward_traced(x, false);
        let (v2, tr2) = self.q2.forward_traced(x, false);
        let mut sel1 = Array2::zeros((rows, 1));
        let mut sel2 = Array2::zeros((rows, 1));
        let mut values = Vec::with_capacity(rows);
        for r in 0..rows {
            if v1[[r, 0]] <= v2[[r, 0]] {
                sel1[[r, 0]] = 1.0;
                values.push(v1[[r, 0]]);
            } else {
                sel2[[r, 0]] = 1.0;
                values.push(v2[[r, 0]]);
            }
        }
        let g1 = self.q1.backward_traced(&tr1, &sel1);
        let g2 = self.q2.backward_traced(&tr2, &sel2);
        Ok((values, g1 + g2))
    }

    pub fn zero_grads(&mut self) {
        self.q1.zero_grads();
        self.q2.zero_grads();
    }

    #[cfg(test)]
    pub(crate) fn replace_online_for_tests(&mut self, q1: Mlp, q2: Mlp) {
        self.q1 = q1;
        self.q2 = q2;
    }

    /// Soft-updates both targets toward their online networks.
    pub fn soft_update(&mut self, tau: f64) -> Result<(), AgentError> {
        self.t1.soft_update_from(&self.q1, tau)?;
        self.t2.soft_update_from(&self.q2, tau)?;
        Ok(())
    }

    /// Exact elementwise check of the soft-update contract, for monitors.
    pub fn target_params(&self) -> (Vec<f64>, Vec<f64>) {
        (self.t1.params_flat(), self.t2.params_flat())
    }

    pub fn online_params(&self) -> (Vec<f64>, Vec<f64>) {
        (self.q1.params_flat(), self.q2.params_flat())
    }

    pub fn visit_state(&self, prefix: &str, mut f: impl FnMut(String, &[f64])) {
        self.q1.visit_state(&format!("{prefix}.q1"), &mut f);
        self.q2.visit_state(&format!("{prefix}.q2"), &mut f);
        self.t1.visit_state(&format!("{prefix}.t1"), &mut f);
        self.t2.visit_state(&format!("{prefix}.t2"), &mut f);
    }

    pub fn restore_state(
        &mut self,
        prefix: &str,
        lookup: &mut impl FnMut(&str) -> Option<Vec<f64>>,
    ) -> Result<(), crate::numerics::NumericsError> {
        self.q1.restore_state(&format!("{prefix}.q1"), lookup)?;
        self.q2.restore_state(&format!("{prefix}.q2"), lookup)?;
        self.t1.restore_state(&format!("{prefix}.t1"), lookup)?;
        self.t2.restore_state(&format!("{prefix}.t2"), lookup)
    }
}
