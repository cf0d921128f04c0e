use super::EnvConfig;
use crate::numerics::ComplexMatrix;
use num_complex::Complex64;
use rand::Rng;

/// Half-wavelength ULA steering vector toward azimuth `theta`:
/// entry `m` is `(1/√n)·exp(jπ·m·sinθ)`.
pub fn steering(theta: f64, n: usize) -> Vec<Complex64> {
    let norm = 1.0 / (n as f64).sqrt();
    let phase = std::f64::consts::PI * theta.sin();
    (0..n)
        .map(|m| Complex64::from_polar(norm, phase * m as f64))
        .collect()
}

/// Per-step channel realization: user positions plus the channels and
/// clutter they induce.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelState {
    pub dl_positions: Vec<(f64, f64)>,
    pub ul_positions: Vec<(f64, f64)>,
    /// g_k: one `tx_antennas`-vector per downlink user.
    pub dl_channels: Vec<Vec<Complex64>>,
    /// h_l: one `rx_antennas`-vector per uplink user.
    pub ul_channels: Vec<Vec<Complex64>>,
    /// G: aggregate reflector coupling, `rx_antennas × tx_antennas`.
    pub clutter: ComplexMatrix,
}

/// 3-D link distance from the BS (at the origin, at height) to a ground
/// position, clamped to the 1 m reference distance.
pub fn link_distance(cfg: &EnvConfig, pos: (f64, f64)) -> f64 {
    (pos.0 * pos.0 + pos.1 * pos.1 + cfg.bs_height_m * cfg.bs_height_m)
        .sqrt()
        .max(1.0)
}

/// Line-of-sight channel amplitude at distance `d`: the square root of the
/// pathloss power gain `ref_gain · d^{-α}`.
pub fn path_amplitude(cfg: &EnvConfig, d: f64) -> f64 {
    (cfg.ref_gain * d.powf(-cfg.pathloss_exponent)).sqrt()
}

fn user_channel(cfg: &EnvConfig, pos: (f64, f64), antennas: usize) -> Vec<Complex64> {
    let d = link_distance(cfg, pos);
    let theta = pos.1.atan2(pos.0);
    let amp = path_amplitude(cfg, d);
    steering(theta, antennas).into_iter().map(|a| a * amp).collect()
}

/// Clutter channel `G = Σ_f β_f a_r(θ_f) a_tᴴ(θ_f)` with
/// `|β_f|² = 10^(gain_db/10) · σ_r²` (real positive amplitudes).
pub fn clutter_matrix(cfg: &EnvConfig) -> ComplexMatrix {
    let mut g = ComplexMatrix::zeros(cfg.rx_antennas, cfg.tx_antennas);
    let beta = (10f64.powf(cfg.interferer_gain_db / 10.0) * cfg.noise_ul_w).sqrt();
    for angle_deg in &cfg.interferer_angles_deg {
        let theta = angle_deg.to_radians();
        let ar = steering(theta, cfg.rx_antennas);
        let at = steering(theta, cfg.tx_antennas);
        let rank_one = ComplexMatrix::outer(&ar, &at).scale(Complex64::new(beta, 0.0));
        g.add_assign(&rank_one).expect("fixed dims");
    }
    g
}

/// Deterministic channel synthesis from user positions.
pub fn channels_from_positions(
    cfg: &EnvConfig,
    dl_positions: Vec<(f64, f64)>,
    ul_positions: Vec<(f64, f64)>,
) -> ChannelState {
    let dl_channels = dl_positions
        .iter()
        .map(|p| user_channel(cfg, *p, cfg.tx_antennas))
        .collect();
    let ul_channels = ul_positions
        .iter()
        .map(|p| user_channel(cfg, *p, cfg.rx_antennas))
        .collect();
    ChannelState {
        dl_positions,
        ul_positions,
        dl_channels,
        ul_channels,
        clutter: clutter_matrix(cfg),
    }
}

/// Uniform positions in the annulus `[min_user_distance_m, cell_radius_m]`.
pub fn sample_positions(cfg: &EnvConfig, count: usize, rng: &mut impl Rng) -> Vec<(f64, f64)> {
    let r2_min = cfg.min_user_distance_m * cfg.min_user_distance_m;
    let r2_max = cfg.cell_radius_m * cfg.cell_radius_m;
    (0..count)
        .map(|_| {
            let r = rng.random_range(r2_min..r2_max).sqrt();
            let phi = rng.random_range(-std::f64::consts::PI..std::f64::consts::PI);
            (r * phi.cos(), r * phi.sin())
        })
        .collect()
}

/// Fresh uniform placement plus the channels it induces.
pub fn sample_channels(cfg: &EnvConfig, rng: &mut impl Rng) -> ChannelState {
    let dl = sample_positions(cfg, cfg.downlink_users, rng);
    let ul = sample_positions(cfg, cfg.uplink_users, rng);
    channels_from_positions(cfg, dl, ul)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::vec_norm;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    #[test]
    fn steering_at_broadside_is_uniform() {
        let a = steering(0.0, 4);
        for entry in a {
            assert!((entry - Complex64::new(0.5, 0.0)).norm() < 1e-15);
        }
    }

    #[test]
    fn steering_at_endfire_alternates_sign() {
        let a = steering(std::f64::consts::FRAC_PI_2, 2);
        let s = 1.0 / 2f64.sqrt();
        assert!((a[0] - Complex64::new(s, 0.0)).norm() < 1e-15);
        assert!((a[1] - Complex64::new(-s, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn steering_matches_per_entry_exponential_oracle() {
        let theta = 20f64.to_radians();
        let a = steering(theta, 6);
        for (m, entry) in a.iter().enumerate() {
            let arg = std::f64::consts::PI * m as f64 * theta.sin();
            let oracle = Complex64::new(arg.cos(), arg.sin()) / 6f64.sqrt();
            assert!((entry - oracle).norm() < 1e-12);
        }
        assert!((vec_norm(&a) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn reference_distance_norm_relates_to_ref_gain() {
        // Ground-level BS, user 1 m away: ‖h‖² equals the reference power
        // gain exactly (unit-norm steering vector).
        let cfg = EnvConfig { bs_height_m: 1e-9, ..EnvConfig::default() };
        let h = user_channel(&cfg, (1.0, 0.0), cfg.rx_antennas);
        assert!((vec_norm(&h) - cfg.ref_gain.sqrt()).abs() < 1e-12 * cfg.ref_gain.sqrt());
    }

    #[test]
    fn same_position_gives_identical_channels() {
        let cfg = EnvConfig::default();
        let state = channels_from_positions(
            &cfg,
            vec![(50.0, -30.0), (50.0, -30.0)],
            vec![(120.0, 80.0)],
        );
        assert_eq!(state.dl_channels[0], state.dl_channels[1]);
    }

    #[test]
    fn channel_norms_match_scalar_pathloss_oracle() {
        let cfg = EnvConfig::default();
        let mut rng = ChaCha20Rng::seed_from_u64(42);
        let state = sample_channels(&cfg, &mut rng);
        for (pos, h) in state.ul_positions.iter().zip(&state.ul_channels) {
            // independent scalar recomputation of the pathloss amplitude
            let d = (pos.0.powi(2) + pos.1.powi(2) + cfg.bs_height_m.powi(2)).sqrt();
            let expected = (cfg.ref_gain * d.powf(-3.6)).sqrt();
            let norm = vec_norm(h);
            assert!((norm - expected).abs() < 1e-12 * expected.max(1e-300), "norm {norm} expected {expected}");
        }
    }

    #[test]
    fn clutter_gain_matches_configured_db() {
        let cfg = EnvConfig {
            interferer_angles_deg: vec![15.0],
            ..EnvConfig::default()
        };
        let g = clutter_matrix(&cfg);
        // For a single reflector, ‖G‖_F = |β| ‖a_r‖ ‖a_t‖ = |β|.
        let mut frob = 0.0;
        for r in 0..g.rows() {
            for c in 0..g.cols() {
                frob += g.get(r, c).norm_sqr();
            }
        }
        let beta_sq = 100.0 * cfg.noise_ul_w;
        assert!((frob - beta_sq).abs() < 1e-12 * beta_sq);
    }

    #[test]
    fn positions_stay_in_annulus() {
        let cfg = EnvConfig::default();
        let mut rng = ChaCha20Rng::seed_from_u64(7);
        for pos in sample_positions(&cfg, 1000, &mut rng) {
            let r = (pos.0 * pos.0 + pos.1 * pos.1).sqrt();
            assert!(r >= cfg.min_user_distance_m && r <= cfg.cell_radius_m);
        }
    }
}
