use super::{link_distance, path_amplitude, ChannelState, EnvConfig};
use crate::numerics::RealTensor;

/// Width of the flattened observation: downlink then uplink positions
/// (2 reals each), then every channel entry as an interleaved re/im pair,
/// users in index order.
pub fn state_width(cfg: &EnvConfig) -> usize {
    2 * cfg.downlink_users
        + 2 * cfg.uplink_users
        + 2 * cfg.tx_antennas * cfg.downlink_users
        + 2 * cfg.rx_antennas * cfg.uplink_users
}

/// Flattens a channel state into the agent's observation vector.
///
/// Positions are scaled by the cell radius; each user's channel entries are
/// divided by that user's pathloss amplitude and rescaled by √n, leaving
/// unit-magnitude phase entries in `[-1, 1]`. Distance information stays in
/// the position features, so the encoding is lossless and every feature is
/// O(1) — which both the networks and the state-diffusion model need.
pub fn encode_state(state: &ChannelState, cfg: &EnvConfig) -> RealTensor {
    let mut out = Vec::with_capacity(state_width(cfg));
    for (x, y) in &state.dl_positions {
        out.push(x / cfg.cell_radius_m);
        out.push(y / cfg.cell_radius_m);
    }
    for (x, y) in &state.ul_positions {
        out.push(x / cfg.cell_radius_m);
        out.push(y / cfg.cell_radius_m);
    }
    for (pos, g) in state.dl_positions.iter().zip(&state.dl_channels) {
        let scale = (cfg.tx_antennas as f64).sqrt() / path_amplitude(cfg, link_distance(cfg, *pos));
        for z in g {
            out.push(z.re * scale);
            out.push(z.im * scale);
        }
    }
    for (pos, h) in state.ul_positions.iter().zip(&state.ul_channels) {
        let scale = (cfg.rx_antennas as f64).sqrt() / path_amplitude(cfg, link_distance(cfg, *pos));
        for z in h {
            out.push(z.re * scale);
            out.push(z.im * scale);
        }
    }
    debug_assert_eq!(out.len(), state_width(cfg));
    RealTensor::vector(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::sample_channels;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    #[test]
    fn encoding_has_declared_width_and_bounded_entries() {
        let cfg = EnvConfig::default();
        let mut rng = ChaCha20Rng::seed_from_u64(0);
        let state = sample_channels(&cfg, &mut rng);
        let enc = encode_state(&state, &cfg);
        assert_eq!(enc.len(), state_width(&cfg));
        for v in enc.data() {
            assert!(v.abs() <= 1.0 + 1e-9, "entry {v} out of range");
        }
    }

    #[test]
    fn encoding_is_deterministic_in_the_state() {
        let cfg = EnvConfig::default();
        let mut rng = ChaCha20Rng::seed_from_u64(1);
        let state = sample_channels(&cfg, &mut rng);
        assert_eq!(encode_state(&state, &cfg), encode_state(&state, &cfg));
    }
}
