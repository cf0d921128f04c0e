use super::{EnvConfig, EnvError};
use crate::numerics::RealTensor;
use num_complex::Complex64;

/// A feasible resource allocation: receive beamformers `w_l`, transmit
/// beamformers `v_k`, and uplink powers `p_l`.
///
/// Produced by [`project_action`], which guarantees `Σ‖v_k‖² ≤ P_max`,
/// `0 ≤ p_l ≤ P_l`, and the canonical normalization `‖w_l‖ = 1` (uplink
/// SINR is invariant to the scale of `w_l`).
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkAction {
    pub rx_beams: Vec<Vec<Complex64>>,
    pub tx_beams: Vec<Vec<Complex64>>,
    pub ul_powers: Vec<f64>,
}

impl NetworkAction {
    /// Width of the flattened real encoding:
    /// `[v re/im | w re/im | p]` = `2·N_t·K + 2·N_r·L + L`.
    pub fn raw_width(cfg: &EnvConfig) -> usize {
        2 * cfg.tx_antennas * cfg.downlink_users
            + 2 * cfg.rx_antennas * cfg.uplink_users
            + cfg.uplink_users
    }

    /// Flattened encoding with the same layout as the raw vector: beam
    /// entries as interleaved re/im pairs, powers normalized to `p/P_l`.
    pub fn encoded(&self, cfg: &EnvConfig) -> Vec<f64> {
        let mut out = Vec::with_capacity(Self::raw_width(cfg));
        for v in &self.tx_beams {
            for z in v {
                out.push(z.re);
                out.push(z.im);
            }
        }
        for w in &self.rx_beams {
            for z in w {
                out.push(z.re);
                out.push(z.im);
            }
        }
        for p in &self.ul_powers {
            out.push(p / cfg.max_ul_power_w);
        }
        out
    }

    /// Rebuilds the action from its flattened encoding.
    pub fn from_encoded(enc: &[f64], cfg: &EnvConfig) -> Result<Self, EnvError> {
        if enc.len() != Self::raw_width(cfg) {
            return Err(EnvError::BadActionWidth {
                expected: Self::raw_width(cfg),
                got: enc.len(),
            });
        }
        let mut idx = 0;
        let read_beams = |users: usize, antennas: usize, idx: &mut usize| {
            (0..users)
                .map(|_| {
                    (0..antennas)
                        .map(|_| {
                            let z = Complex64::new(enc[*idx], enc[*idx + 1]);
                            *idx += 2;
                            z
                        })
                        .collect::<Vec<_>>()
                })
                .collect::<Vec<_>>()
        };
        let tx_beams = read_beams(cfg.downlink_users, cfg.tx_antennas, &mut idx);
        let rx_beams = read_beams(cfg.uplink_users, cfg.rx_antennas, &mut idx);
        let ul_powers = enc[idx..].iter().map(|p| p * cfg.max_ul_power_w).collect();
        Ok(Self { rx_beams, tx_beams, ul_powers })
    }
}

/// Intermediates of a [`project_encode`] call, retained for its
/// vector-Jacobian product.
#[derive(Debug, Clone)]
pub struct ProjectionCache {
    raw: Vec<f64>,
    v_sum_sq: f64,
    v_scale: f64,
    w_norms: Vec<f64>,
    p_sigmoid: Vec<f64>,
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Maps an unconstrained raw vector onto the feasible encoded action:
/// the transmit block is radially scaled into the power ball, each receive
/// beamformer is normalized to unit norm (zero raws fall back to the first
/// basis vector), and each power entry is squashed through a sigmoid onto
/// `(0, 1)`.
pub fn project_encode(
    raw: &[f64],
    cfg: &EnvConfig,
) -> Result<(Vec<f64>, ProjectionCache), EnvError> {
    let width = NetworkAction::raw_width(cfg);
    if raw.len() != width {
        return Err(EnvError::BadActionWidth { expected: width, got: raw.len() });
    }
    let v_len = 2 * cfg.tx_antennas * cfg.downlink_users;
    let w_len = 2 * cfg.rx_antennas * cfg.uplink_users;
    let w_per_user = 2 * cfg.rx_antennas;

    let mut enc = vec![0.0; width];

    let v_sum_sq: f64 = raw[..v_len].iter().map(|x| x * x).sum();
    let v_scale =
        if v_sum_sq > cfg.max_bs_power_w { (cfg.max_bs_power_w / v_sum_sq).sqrt() } else { 1.0 };
    for i in 0..v_len {
        enc[i] = v_scale * raw[i];
    }

    let mut w_norms = Vec::with_capacity(cfg.uplink_users);
    for l in 0..cfg.uplink_users {
        let off = v_len + l * w_per_user;
        let norm: f64 = raw[off..off + w_per_user].iter().map(|x| x * x).sum::<f64>().sqrt();
        w_norms.push(norm);
        if norm > 1e-12 {
            for i in 0..w_per_user {
                enc[off + i] = raw[off + i] / norm;
            }
        } else {
            enc[off] = 1.0;
        }
    }

    let mut p_sigmoid = Vec::with_capacity(cfg.uplink_users);
    for l in 0..cfg.uplink_users {
        let s = sigmoid(raw[v_len + w_len + l]);
        p_sigmoid.push(s);
        enc[v_len + w_len + l] = s;
    }

    let cache =
        ProjectionCache { raw: raw.to_vec(), v_sum_sq, v_scale, w_norms, p_sigmoid };
    Ok((enc, cache))
}

/// Vector-Jacobian product of [`project_encode`]: pulls a gradient with
/// respect to the encoded action back to the raw vector.
pub fn project_encode_vjp(cache: &ProjectionCache, g_enc: &[f64], cfg: &EnvConfig) -> Vec<f64> {
    let v_len = 2 * cfg.tx_antennas * cfg.downlink_users;
    let w_len = 2 * cfg.rx_antennas * cfg.uplink_users;
    let w_per_user = 2 * cfg.rx_antennas;
    debug_assert_eq!(g_enc.len(), cache.raw.len());

    let mut g_raw = vec![0.0; cache.raw.len()];

    if cache.v_sum_sq > cfg.max_bs_power_w {
        // enc_i = σ(s)·raw_i with σ = √(P/s): dσ/ds = −σ/(2s)
        let s = cache.v_sum_sq;
        let sigma = cache.v_scale;
        let dot: f64 = (0..v_len).map(|i| g_enc[i] * cache.raw[i]).sum();
        let coeff = -sigma / s * dot;
        for i in 0..v_len {
            g_raw[i] = sigma * g_enc[i] + coeff * cache.raw[i];
        }
    } else {
        g_raw[..v_len].copy_from_slice(&g_enc[..v_len]);
    }

    for l in 0..cfg.uplink_users {
        let off = v_len + l * w_per_user;
        let norm = cache.w_norms[l];
        if norm > 1e-12 {
            let dot: f64 = (0..w_per_user)
                .map(|i| g_enc[off + i] * cache.raw[off + i])
                .sum::<f64>()
                / (norm * norm);
            for i in 0..w_per_user {
                g_raw[off + i] = (g_enc[off + i] - dot * cache.raw[off + i]) / norm;
            }
        }
        // zero raw beam: projection is constant there, gradient vanishes
    }

    for l in 0..cfg.uplink_users {
        let idx = v_len + w_len + l;
        let s = cache.p_sigmoid[l];
        g_raw[idx] = g_enc[idx] * s * (1.0 - s);
    }

    g_raw
}

/// Projects a raw vector onto a feasible [`NetworkAction`].
pub fn project_action(raw: &RealTensor, cfg: &EnvConfig) -> Result<NetworkAction, EnvError> {
    let (enc, _) = project_encode(raw.data(), cfg)?;
    NetworkAction::from_encoded(&enc, cfg)
}
