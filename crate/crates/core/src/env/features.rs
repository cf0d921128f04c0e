use super::{steering, EnvConfig};

/// Beam-alignment featurization of an encoded `(state, action)` pair, used
/// to enrich the critics' input: the complex inner products between each
/// user's encoded channel and its beamformer, plus each receive
/// beamformer's alignment with the configured clutter directions. All
/// features are pure deterministic functions of `(S, A)` and linear in the
/// action encoding, so the action VJP has closed form.
#[derive(Debug, Clone)]
pub struct AlignmentFeatures {
    downlink_users: usize,
    uplink_users: usize,
    tx_antennas: usize,
    rx_antennas: usize,
    /// Interferer steering vectors as interleaved re/im, one per direction.
    clutter_dirs: Vec<Vec<f64>>,
}

impl AlignmentFeatures {
    pub fn new(cfg: &EnvConfig) -> Self {
        let clutter_dirs = cfg
            .interferer_angles_deg
            .iter()
            .map(|deg| {
                steering(deg.to_radians(), cfg.rx_antennas)
                    .into_iter()
                    .flat_map(|z| [z.re, z.im])
                    .collect()
            })
            .collect();
        Self {
            downlink_users: cfg.downlink_users,
            uplink_users: cfg.uplink_users,
            tx_antennas: cfg.tx_antennas,
            rx_antennas: cfg.rx_antennas,
            clutter_dirs,
        }
    }

    /// Feature width: re/im pairs for K downlink and L uplink alignments
    /// plus F·L clutter alignments.
    pub fn width(&self) -> usize {
        2 * self.downlink_users
            + 2 * self.uplink_users
            + 2 * self.clutter_dirs.len() * self.uplink_users
    }

    fn positions_width(&self) -> usize {
        2 * self.downlink_users + 2 * self.uplink_users
    }

    /// Complex dot `conj(a)·b` over interleaved re/im slices.
    fn cdot(a: &[f64], b: &[f64]) -> (f64, f64) {
        let mut re = 0.0;
        let mut im = 0.0;
        for m in 0..a.len() / 2 {
            let (ar, ai) = (a[2 * m], a[2 * m + 1]);
            let (br, bi) = (b[2 * m], b[2 * m + 1]);
            re += ar * br + ai * bi;
            im += ar * bi - ai * br;
        }
        (re, im)
    }

    /// Computes the feature vector for one encoded `(state, action)` pair.
    pub fn compute(&self, s_enc: &[f64], a_enc: &[f64]) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.width());
        let s_dl = self.positions_width();
        let s_ul = s_dl + 2 * self.tx_antennas * self.downlink_users;
        let a_ul = 2 * self.tx_antennas * self.downlink_users;
        for k in 0..self.downlink_users {
            let g = &s_enc[s_dl + k * 2 * self.tx_antennas..s_dl + (k + 1) * 2 * self.tx_antennas];
            let v = &a_enc[k * 2 * self.tx_antennas..(k + 1) * 2 * self.tx_antennas];
            let (re, im) = Self::cdot(g, v);
            out.push(re);
            out.push(im);
        }
        for l in 0..self.uplink_users {
            let h = &s_enc[s_ul + l * 2 * self.rx_antennas..s_ul + (l + 1) * 2 * self.rx_antennas];
            let w = &a_enc[a_ul + l * 2 * self.rx_antennas..a_ul + (l + 1) * 2 * self.rx_antennas];
            let (re, im) = Self::cdot(h, w);
            out.push(re);
            out.push(im);
        }
        for dir in &self.clutter_dirs {
            for l in 0..self.uplink_users {
                let w = &a_enc
                    [a_ul + l * 2 * self.rx_antennas..a_ul + (l + 1) * 2 * self.rx_antennas];
                let (re, im) = Self::cdot(dir, w);
                out.push(re);
                out.push(im);
            }
        }
        out
    }

    /// Pulls a gradient over the features back to the action encoding
    /// (the features are linear in the action given the state).
    ///
    /// For `f_re + i f_im = Σ_m conj(c_m) a_m`:
    /// `∂f_re/∂a_re = c_re, ∂f_re/∂a_im = c_im, ∂f_im/∂a_re = c_im·(−1)…`
    /// spelled out below.
    pub fn vjp_action(&self, s_enc: &[f64], g_feat: &[f64], action_width: usize) -> Vec<f64> {
        debug_assert_eq!(g_feat.len(), self.width());
        let mut g_a = vec![0.0; action_width];
        let s_dl = self.positions_width();
        let s_ul = s_dl + 2 * self.tx_antennas * self.downlink_users;
        let a_ul = 2 * self.tx_antennas * self.downlink_users;
        let mut fi = 0;
        let add = |conj_side: &[f64], a_off: usize, g_a: &mut [f64], g_re: f64, g_im: f64| {
            for m in 0..conj_side.len() / 2 {
                let (cr, ci) = (conj_side[2 * m], conj_side[2 * m + 1]);
                // re += cr·ar + ci·ai ; im += cr·ai − ci·ar
                g_a[a_off + 2 * m] += g_re * cr - g_im * ci;
                g_a[a_off + 2 * m + 1] += g_re * ci + g_im * cr;
            }
        };
        for k in 0..self.downlink_users {
            let g = &s_enc[s_dl + k * 2 * self.tx_antennas..s_dl + (k + 1) * 2 * self.tx_antennas];
            add(g, k * 2 * self.tx_antennas, &mut g_a, g_feat[fi], g_feat[fi + 1]);
            fi += 2;
        }
        for l in 0..self.uplink_users {
            let h = &s_enc[s_ul + l * 2 * self.rx_antennas..s_ul + (l + 1) * 2 * self.rx_antennas];
            add(h, a_ul + l * 2 * self.rx_antennas, &mut g_a, g_feat[fi], g_feat[fi + 1]);
            fi += 2;
        }
        for dir in &self.clutter_dirs {
            for l in 0..self.uplink_users {
                add(dir, a_ul + l * 2 * self.rx_antennas, &mut g_a, g_feat[fi], g_feat[fi + 1]);
                fi += 2;
            }
        }
        g_a
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::{encode_state, project_encode, sample_channels, NetworkAction};
    use crate::numerics::{central_diff_grad, max_rel_err};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha20Rng;

    fn cfg() -> EnvConfig {
        EnvConfig {
            downlink_users: 2,
            uplink_users: 2,
            tx_antennas: 3,
            rx_antennas: 3,
            ..EnvConfig::default()
        }
    }

    #[test]
    fn width_matches_compute() {
        let cfg = cfg();
        let feats = AlignmentFeatures::new(&cfg);
        let mut rng = ChaCha20Rng::seed_from_u64(0);
        let state = sample_channels(&cfg, &mut rng);
        let s_enc = encode_state(&state, &cfg);
        let a_enc = vec![0.2; NetworkAction::raw_width(&cfg)];
        assert_eq!(feats.compute(s_enc.data(), &a_enc).len(), feats.width());
        // K=2, L=2, F=2: 4 + 4 + 8
        assert_eq!(feats.width(), 16);
    }

    #[test]
    fn dl_alignment_feature_matches_direct_inner_product() {
        let cfg = cfg();
        let feats = AlignmentFeatures::new(&cfg);
        let mut rng = ChaCha20Rng::seed_from_u64(1);
        let state = sample_channels(&cfg, &mut rng);
        let s_enc = encode_state(&state, &cfg);
        let raw: Vec<f64> = (0..NetworkAction::raw_width(&cfg))
            .map(|_| rng.random_range(-1.0..1.0))
            .collect();
        let (a_enc, _) = project_encode(&raw, &cfg).unwrap();
        let action = NetworkAction::from_encoded(&a_enc, &cfg).unwrap();
        let out = feats.compute(s_enc.data(), &a_enc);

        // the first feature pair is conj(g_enc_0)·v_0 where g_enc is the
        // unit-phase-rescaled channel
        use crate::env::{link_distance, path_amplitude};
        let scale = (cfg.tx_antennas as f64).sqrt()
            / path_amplitude(&cfg, link_distance(&cfg, state.dl_positions[0]));
        let dot: num_complex::Complex64 = state.dl_channels[0]
            .iter()
            .zip(&action.tx_beams[0])
            .map(|(g, v)| g.conj() * v * scale)
            .sum();
        assert!((out[0] - dot.re).abs() < 1e-12);
        assert!((out[1] - dot.im).abs() < 1e-12);
    }

    #[test]
    fn action_vjp_matches_central_differences() {
        let cfg = cfg();
        let feats = AlignmentFeatures::new(&cfg);
        let mut rng = ChaCha20Rng::seed_from_u64(2);
        let state = sample_channels(&cfg, &mut rng);
        let s_enc = encode_state(&state, &cfg);
        let width = NetworkAction::raw_width(&cfg);
        let a_enc: Vec<f64> = (0..width).map(|_| rng.random_range(-1.0..1.0)).collect();
        let weights: Vec<f64> =
            (0..feats.width()).map(|_| rng.random_range(-1.0..1.0)).collect();

        let analytic = feats.vjp_action(s_enc.data(), &weights, width);
        let mut f = |a: &[f64]| {
            feats
                .compute(s_enc.data(), a)
                .iter()
                .zip(&weights)
                .map(|(x, w)| x * w)
                .sum::<f64>()
        };
        let numeric = central_diff_grad(&mut f, &a_enc, 1e-6);
        assert!(max_rel_err(&analytic, &numeric, 1e-9) < 1e-7);
    }
}
