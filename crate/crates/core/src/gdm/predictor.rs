use super::GdmError;
use crate::numerics::{Activation, Mlp, MlpTrace, RealTensor};
use ndarray::{Array2, ArrayView2};
use rand::Rng;

/// Width of the sinusoidal diffusion-step code appended to every predictor
/// input.
pub const STEP_EMBED_WIDTH: usize = 8;

/// Sinusoidal code for a step index: interleaved sin/cos at geometrically
/// spaced frequencies, distinct for all small step counts.
pub(crate) fn step_embedding(p: usize) -> [f64; STEP_EMBED_WIDTH] {
    let mut e = [0.0; STEP_EMBED_WIDTH];
    let mut freq = 1.0;
    for i in 0..STEP_EMBED_WIDTH / 2 {
        e[2 * i] = (p as f64 * freq).sin();
        e[2 * i + 1] = (p as f64 * freq).cos();
        freq /= 3.0;
    }
    e
}

/// A conditional noise predictor: an MLP taking `[noisy sample | step code |
/// conditioning]` and returning a predicted noise of the sample's width.
#[derive(Debug, Clone)]
pub struct NoisePredictor {
    mlp: Mlp,
    sample_width: usize,
    cond_width: usize,
}

impl NoisePredictor {
    pub fn new(
        sample_width: usize,
        cond_width: usize,
        hidden_layers: usize,
        hidden_width: usize,
        rng: &mut impl Rng,
    ) -> Self {
        let mut widths = Vec::with_capacity(hidden_layers + 2);
        widths.push(sample_width + STEP_EMBED_WIDTH + cond_width);
        widths.extend(std::iter::repeat(hidden_width).take(hidden_layers));
        widths.push(sample_width);
        let mlp = Mlp::new(&widths, Activation::Silu, Activation::Identity, rng);
        Self { mlp, sample_width, cond_width }
    }

    pub fn sample_width(&self) -> usize {
        self.sample_width
    }

    pub fn cond_width(&self) -> usize {
        self.cond_width
    }

    pub fn mlp(&self) -> &Mlp {
        &self.mlp
    }

    pub fn mlp_mut(&mut self) -> &mut Mlp {
        &mut self.mlp
    }

    pub(crate) fn check_cond(&self, cond: &RealTensor) -> Result<(), GdmError> {
        if cond.width() != self.cond_width {
            return Err(GdmError::WidthMismatch(format!(
                "conditioning width {} != expected {}",
                cond.width(),
                self.cond_width
            )));
        }
        Ok(())
    }

    /// Assembles `[x | step code | cond]` rows. `steps` holds one step index
    /// per row (a single shared index may be broadcast by the caller).
    pub(crate) fn assemble_input(
        &self,
        x: ArrayView2<'_, f64>,
        steps: &[usize],
        cond: ArrayView2<'_, f64>,
    ) -> Array2<f64> {
        let rows = x.dim().0;
        debug_assert_eq!(steps.len(), rows);
        debug_assert_eq!(cond.dim().0, rows);
        let width = self.sample_width + STEP_EMBED_WIDTH + self.cond_width;
        let mut input = Array2::zeros((rows, width));
        for r in 0..rows {
            let embed = step_embedding(steps[r]);
            let mut row = input.row_mut(r);
            for (i, v) in x.row(r).iter().enumerate() {
                row[i] = *v;
            }
            for (i, v) in embed.iter().enumerate() {
                row[self.sample_width + i] = *v;
            }
            for (i, v) in cond.row(r).iter().enumerate() {
                row[self.sample_width + STEP_EMBED_WIDTH + i] = *v;
            }
        }
        input
    }

    /// Predicted noise without recording a trace.
    pub(crate) fn predict(
        &self,
        x: ArrayView2<'_, f64>,
        steps: &[usize],
        cond: ArrayView2<'_, f64>,
    ) -> Array2<f64> {
        let input = self.assemble_input(x, steps, cond);
        let (out, _) = self.mlp.forward_traced(input.view(), false);
        out
    }

    /// Predicted noise plus the forward trace needed to backpropagate
    /// through this application.
    pub(crate) fn predict_traced(
        &self,
        x: ArrayView2<'_, f64>,
        steps: &[usize],
        cond: ArrayView2<'_, f64>,
    ) -> (Array2<f64>, MlpTrace) {
        let input = self.assemble_input(x, steps, cond);
        self.mlp.forward_traced(input.view(), false)
    }
}
