use super::{NumericsError, RealTensor};
use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::Rng;
use rand_distr::StandardNormal;

const ADAM_BETA1: f64 = 0.9;
const ADAM_BETA2: f64 = 0.999;
const ADAM_EPS: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    /// Sigmoid-weighted linear unit `x * sigmoid(x)`.
    Silu,
    Identity,
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

impl Activation {
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Silu => z * sigmoid(z),
            Activation::Identity => z,
        }
    }

    fn derivative(self, z: f64) -> f64 {
        match self {
            Activation::Silu => {
                let s = sigmoid(z);
                s * (1.0 + z * (1.0 - s))
            }
            Activation::Identity => 1.0,
        }
    }
}

#[derive(Debug, Clone)]
struct Layer {
    w: Array2<f64>, // out x in
    b: Array1<f64>,
    act: Activation,
    gw: Array2<f64>,
    gb: Array1<f64>,
    mw: Array2<f64>,
    vw: Array2<f64>,
    mb: Array1<f64>,
    vb: Array1<f64>,
}

impl Layer {
    fn new(input: usize, output: usize, act: Activation, rng: &mut impl Rng) -> Self {
        let std = (1.0 / input as f64).sqrt();
        let w = Array2::from_shape_fn((output, input), |_| {
            std * rng.sample::<f64, _>(StandardNormal)
        });
        Self {
            w,
            b: Array1::zeros(output),
            act,
            gw: Array2::zeros((output, input)),
            gb: Array1::zeros(output),
            mw: Array2::zeros((output, input)),
            vw: Array2::zeros((output, input)),
            mb: Array1::zeros(output),
            vb: Array1::zeros(output),
        }
    }
}

/// Recorded intermediates of one forward pass, consumed by the matching
/// backward pass. Chains that apply a network several times keep one trace
/// per application.
#[derive(Debug, Clone)]
pub struct MlpTrace {
    inputs: Vec<Array2<f64>>,   // activation entering each layer
    preacts: Vec<Array2<f64>>,  // z = x wᵀ + b per layer
    rank1: bool,
}

impl MlpTrace {
    pub fn batch_size(&self) -> usize {
        self.inputs[0].dim().0
    }
}

/// Per-layer sums of absolute gradients, one entry per trainable layer.
#[derive(Debug, Clone, PartialEq)]
pub struct GradReport {
    pub weight_sums: Vec<f64>,
    pub bias_sums: Vec<f64>,
}

impl GradReport {
    pub fn layers(&self) -> usize {
        self.weight_sums.len()
    }

    pub fn total_weight(&self) -> f64 {
        self.weight_sums.iter().sum()
    }

    pub fn total_bias(&self) -> f64 {
        self.bias_sums.iter().sum()
    }

    pub fn zeros(layers: usize) -> Self {
        Self { weight_sums: vec![0.0; layers], bias_sums: vec![0.0; layers] }
    }
}

/// A fully connected feed-forward network with per-layer activations,
/// gradient accumulators, and AdamW state.
#[derive(Debug, Clone)]
pub struct Mlp {
    layers: Vec<Layer>,
    widths: Vec<usize>,
    adam_step_count: u64,
    last_trace: Option<MlpTrace>,
    last_input_grad: Option<RealTensor>,
}

impl Mlp {
    /// Builds a network from layer widths `[input, hidden.., output]`.
    /// Hidden layers use `hidden_act`, the last layer `output_act`.
    pub fn new(
        widths: &[usize],
        hidden_act: Activation,
        output_act: Activation,
        rng: &mut impl Rng,
    ) -> Self {
        assert!(widths.len() >= 2, "need at least input and output widths");
        let n = widths.len() - 1;
        let layers = (0..n)
            .map(|i| {
                let act = if i + 1 == n { output_act } else { hidden_act };
                Layer::new(widths[i], widths[i + 1], act, rng)
            })
            .collect();
        Self {
            layers,
            widths: widths.to_vec(),
            adam_step_count: 0,
            last_trace: None,
            last_input_grad: None,
        }
    }

    pub fn widths(&self) -> &[usize] {
        &self.widths
    }

    pub fn input_width(&self) -> usize {
        self.widths[0]
    }

    pub fn output_width(&self) -> usize {
        *self.widths.last().unwrap()
    }

    pub fn num_layers(&self) -> usize {
        self.layers.len()
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(|l| l.w.len() + l.b.len()).sum()
    }

    /// Zeroes the final layer's weights and bias (used by networks that must
    /// start as an exact no-op).
    pub fn zero_final_layer(&mut self) {
        let l = self.layers.last_mut().unwrap();
        l.w.fill(0.0);
        l.b.fill(0.0);
    }

    pub fn zero_all_params(&mut self) {
        for l in &mut self.layers {
            l.w.fill(0.0);
            l.b.fill(0.0);
        }
    }

    fn check_input(&self, input: &RealTensor) -> Result<(), NumericsError> {
        if input.width() != self.input_width() {
            return Err(NumericsError::ShapeMismatch {
                expected: format!("input width {}", self.input_width()),
                got: format!("width {}", input.width()),
            });
        }
        Ok(())
    }

    /// Forward pass that records intermediates for a later [`Mlp::backward`].
    pub fn forward(&mut self, input: &RealTensor) -> Result<RealTensor, NumericsError> {
        self.check_input(input)?;
        let rank1 = input.shape().len() == 1;
        let (out, trace) = self.forward_traced(input.as_matrix(), rank1);
        self.last_trace = Some(trace);
        Ok(RealTensor::from_array2(out, rank1))
    }

    /// Forward pass without recording (target networks, evaluation).
    pub fn infer(&self, input: &RealTensor) -> Result<RealTensor, NumericsError> {
        self.check_input(input)?;
        let rank1 = input.shape().len() == 1;
        let (out, _) = self.forward_traced(input.as_matrix(), rank1);
        Ok(RealTensor::from_array2(out, rank1))
    }

    pub(crate) fn forward_traced(&self, x: ArrayView2<'_, f64>, rank1: bool) -> (Array2<f64>, MlpTrace) {
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut preacts = Vec::with_capacity(self.layers.len());
        let mut a = x.to_owned();
        for layer in &self.layers {
            inputs.push(a.clone());
            let mut z = a.dot(&layer.w.t());
            z += &layer.b;
            preacts.push(z.clone());
            a = z.mapv(|v| layer.act.apply(v));
        }
        (a, MlpTrace { inputs, preacts, rank1 })
    }

    /// Backward pass over the most recent [`Mlp::forward`]. Accumulates
    /// parameter gradients and stores the input gradient; returns the
    /// per-layer absolute-gradient sums.
    ///
    /// `loss_grad` is dL/d(output) with the same shape as the forward
    /// output, including any batch normalization the loss applies.
    pub fn backward(&mut self, loss_grad: &RealTensor) -> Result<GradReport, NumericsError> {
        let trace = self.last_trace.take().ok_or(NumericsError::NoForwardTrace)?;
        if loss_grad.width() != self.output_width() || loss_grad.rows() != trace.batch_size() {
            return Err(NumericsError::ShapeMismatch {
                expected: format!("loss grad [{}, {}]", trace.batch_size(), self.output_width()),
                got: format!("[{}, {}]", loss_grad.rows(), loss_grad.width()),
            });
        }
        let rank1 = trace.rank1;
        let dx = self.backward_traced(&trace, &loss_grad.as_matrix().to_owned());
        self.last_input_grad = Some(RealTensor::from_array2(dx, rank1));
        Ok(self.grad_report())
    }

    /// Gradient of the loss with respect to the input of the last
    /// [`Mlp::backward`] pass.
    pub fn last_input_grad(&self) -> Option<&RealTensor> {
        self.last_input_grad.as_ref()
    }

    pub(crate) fn backward_traced(&mut self, trace: &MlpTrace, dy: &Array2<f64>) -> Array2<f64> {
        let mut grad = dy.clone();
        for (i, layer) in self.layers.iter_mut().enumerate().rev() {
            let z = &trace.preacts[i];
            let dz = &grad * &z.mapv(|v| layer.act.derivative(v));
            layer.gw += &dz.t().dot(&trace.inputs[i]);
            layer.gb += &dz.sum_axis(Axis(0));
            grad = dz.dot(&layer.w);
        }
        grad
    }

    pub fn zero_grads(&mut self) {
        for l in &mut self.layers {
            l.gw.fill(0.0);
            l.gb.fill(0.0);
        }
    }

    pub fn grad_report(&self) -> GradReport {
        GradReport {
            weight_sums: self.layers.iter().map(|l| l.gw.iter().map(|g| g.abs()).sum()).collect(),
            bias_sums: self.layers.iter().map(|l| l.gb.iter().map(|g| g.abs()).sum()).collect(),
        }
    }

    /// One AdamW step (decoupled weight decay) over the accumulated
    /// gradients. Aborts without touching any state if a gradient is
    /// non-finite.
    pub fn adam_step(&mut self, learning_rate: f64, weight_decay: f64) -> Result<(), NumericsError> {
        let finite = self
            .layers
            .iter()
            .all(|l| l.gw.iter().all(|g| g.is_finite()) && l.gb.iter().all(|g| g.is_finite()));
        if !finite {
            return Err(NumericsError::NonFiniteGradient);
        }
        self.adam_step_count += 1;
        let t = self.adam_step_count as i32;
        let bc1 = 1.0 - ADAM_BETA1.powi(t);
        let bc2 = 1.0 - ADAM_BETA2.powi(t);
        for l in &mut self.layers {
            adam_update(
                l.w.as_slice_mut().unwrap(),
                l.gw.as_slice().unwrap(),
                l.mw.as_slice_mut().unwrap(),
                l.vw.as_slice_mut().unwrap(),
                learning_rate,
                weight_decay,
                bc1,
                bc2,
            );
            adam_update(
                l.b.as_slice_mut().unwrap(),
                l.gb.as_slice().unwrap(),
                l.mb.as_slice_mut().unwrap(),
                l.vb.as_slice_mut().unwrap(),
                learning_rate,
                weight_decay,
                bc1,
                bc2,
            );
        }
        Ok(())
    }

    pub fn adam_step_count(&self) -> u64 {
        self.adam_step_count
    }

    /// Blends `target ← τ·online + (1−τ)·target` elementwise.
    pub fn soft_update_from(&mut self, online: &Mlp, tau: f64) -> Result<(), NumericsError> {
        if self.widths != online.widths {
            return Err(NumericsError::ShapeMismatch {
                expected: format!("{:?}", online.widths),
                got: format!("{:?}", self.widths),
            });
        }
        for (t, o) in self.layers.iter_mut().zip(&online.layers) {
            t.w.zip_mut_with(&o.w, |tv, ov| *tv = tau * ov + (1.0 - tau) * *tv);
            t.b.zip_mut_with(&o.b, |tv, ov| *tv = tau * ov + (1.0 - tau) * *tv);
        }
        Ok(())
    }

    pub fn params_flat(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        for l in &self.layers {
            out.extend(l.w.iter());
            out.extend(l.b.iter());
        }
        out
    }

    pub fn set_params_flat(&mut self, params: &[f64]) -> Result<(), NumericsError> {
        if params.len() != self.param_count() {
            return Err(NumericsError::ShapeMismatch {
                expected: format!("{} params", self.param_count()),
                got: format!("{}", params.len()),
            });
        }
        let mut off = 0;
        for l in &mut self.layers {
            for w in l.w.iter_mut() {
                *w = params[off];
                off += 1;
            }
            for b in l.b.iter_mut() {
                *b = params[off];
                off += 1;
            }
        }
        Ok(())
    }

    pub fn grads_flat(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        for l in &self.layers {
            out.extend(l.gw.iter());
            out.extend(l.gb.iter());
        }
        out
    }

    /// Visits every persistent tensor (parameters, optimizer moments, and
    /// the step counter) as `(name, values)`, in a stable order. Used by
    /// checkpointing.
    pub fn visit_state(&self, prefix: &str, mut f: impl FnMut(String, &[f64])) {
        for (i, l) in self.layers.iter().enumerate() {
            f(format!("{prefix}.l{i}.w"), l.w.as_slice().unwrap());
            f(format!("{prefix}.l{i}.b"), l.b.as_slice().unwrap());
            f(format!("{prefix}.l{i}.mw"), l.mw.as_slice().unwrap());
            f(format!("{prefix}.l{i}.vw"), l.vw.as_slice().unwrap());
            f(format!("{prefix}.l{i}.mb"), l.mb.as_slice().unwrap());
            f(format!("{prefix}.l{i}.vb"), l.vb.as_slice().unwrap());
        }
        f(format!("{prefix}.adam_steps"), &[self.adam_step_count as f64]);
    }

    /// Restores tensors visited by [`Mlp::visit_state`].
    pub fn restore_state(
        &mut self,
        prefix: &str,
        lookup: &mut impl FnMut(&str) -> Option<Vec<f64>>,
    ) -> Result<(), NumericsError> {
        for i in 0..self.layers.len() {
            let names = ["w", "b", "mw", "vw", "mb", "vb"];
            for name in names {
                let key = format!("{prefix}.l{i}.{name}");
                let vals = lookup(&key).ok_or_else(|| NumericsError::ShapeMismatch {
                    expected: key.clone(),
                    got: "missing tensor".into(),
                })?;
                let l = &mut self.layers[i];
                let slot: &mut [f64] = match name {
                    "w" => l.w.as_slice_mut().unwrap(),
                    "b" => l.b.as_slice_mut().unwrap(),
                    "mw" => l.mw.as_slice_mut().unwrap(),
                    "vw" => l.vw.as_slice_mut().unwrap(),
                    "mb" => l.mb.as_slice_mut().unwrap(),
                    "vb" => l.vb.as_slice_mut().unwrap(),
                    _ => unreachable!(),
                };
                if vals.len() != slot.len() {
                    return Err(NumericsError::ShapeMismatch {
                        expected: format!("{} values for {key}", slot.len()),
                        got: format!("{}", vals.len()),
                    });
                }
                slot.copy_from_slice(&vals);
            }
        }
        let key = format!("{prefix}.adam_steps");
        let vals = lookup(&key).ok_or_else(|| NumericsError::ShapeMismatch {
            expected: key,
            got: "missing tensor".into(),
        })?;
        self.adam_step_count = vals.first().copied().unwrap_or(0.0) as u64;
        Ok(())
    }
}

#[allow(clippy::too_many_arguments)]
fn adam_update(
    params: &mut [f64],
    grads: &[f64],
    m: &mut [f64],
    v: &mut [f64],
    lr: f64,
    wd: f64,
    bc1: f64,
    bc2: f64,
) {
    for i in 0..params.len() {
        let g = grads[i];
        m[i] = ADAM_BETA1 * m[i] + (1.0 - ADAM_BETA1) * g;
        v[i] = ADAM_BETA2 * v[i] + (1.0 - ADAM_BETA2) * g * g;
        let mhat = m[i] / bc1;
        let vhat = v[i] / bc2;
        params[i] -= lr * (mhat / (vhat.sqrt() + ADAM_EPS) + wd * params[i]);
    }
}
