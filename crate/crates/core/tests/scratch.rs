use d2rl::env::*;
use d2rl::numerics::RealTensor;
use d2rl::rewards::upper_bound;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

#[test]
fn probe_rate_scales() {
    let cfg = EnvConfig {
        downlink_users: 2,
        uplink_users: 2,
        tx_antennas: 3,
        rx_antennas: 3,
        ..EnvConfig::default()
    };
    let mut rng = ChaCha20Rng::seed_from_u64(0);
    let mut random_c = 0.0;
    let mut matched_c = 0.0;
    let mut bound = 0.0;
    let n = 200;
    for _ in 0..n {
        let state = sample_channels(&cfg, &mut rng);
        bound += upper_bound(&state, &cfg);

        // random action
        let raw: Vec<f64> = (0..NetworkAction::raw_width(&cfg))
            .map(|_| rng.random_range(-1.0..1.0))
            .collect();
        let a = project_action(&RealTensor::vector(raw), &cfg).unwrap();
        random_c += sum_rate(&state, &a, &cfg).unwrap().sum_rate;

        // matched-filter action: v_k ∝ g_k with equal power split, w_l = h_l/‖h_l‖, p = P_l
        let mut tx = Vec::new();
        for g in &state.dl_channels {
            let norm: f64 = g.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            let p_share = (cfg.max_bs_power_w / cfg.downlink_users as f64).sqrt();
            tx.push(g.iter().map(|z| z / norm * p_share).collect::<Vec<Complex64>>());
        }
        let mut rx = Vec::new();
        for h in &state.ul_channels {
            let norm: f64 = h.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            rx.push(h.iter().map(|z| z / norm).collect::<Vec<Complex64>>());
        }
        let a = NetworkAction {
            rx_beams: rx,
            tx_beams: tx,
            ul_powers: vec![cfg.max_ul_power_w; cfg.uplink_users],
        };
        matched_c += sum_rate(&state, &a, &cfg).unwrap().sum_rate;
    }
    println!(
        "tiny profile: random C = {:.3}, matched C = {:.3}, upper bound = {:.3}",
        random_c / n as f64,
        matched_c / n as f64,
        bound / n as f64
    );

    let cfg = EnvConfig::default();
    let mut random_c = 0.0;
    let mut matched_c = 0.0;
    let mut bound = 0.0;
    for _ in 0..n {
        let state = sample_channels(&cfg, &mut rng);
        bound += upper_bound(&state, &cfg);
        let raw: Vec<f64> = (0..NetworkAction::raw_width(&cfg))
            .map(|_| rng.random_range(-1.0..1.0))
            .collect();
        let a = project_action(&RealTensor::vector(raw), &cfg).unwrap();
        random_c += sum_rate(&state, &a, &cfg).unwrap().sum_rate;
        let mut tx = Vec::new();
        for g in &state.dl_channels {
            let norm: f64 = g.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            let p_share = (cfg.max_bs_power_w / cfg.downlink_users as f64).sqrt();
            tx.push(g.iter().map(|z| z / norm * p_share).collect::<Vec<Complex64>>());
        }
        let mut rx = Vec::new();
        for h in &state.ul_channels {
            let norm: f64 = h.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            rx.push(h.iter().map(|z| z / norm).collect::<Vec<Complex64>>());
        }
        let a = NetworkAction {
            rx_beams: rx,
            tx_beams: tx,
            ul_powers: vec![cfg.max_ul_power_w; cfg.uplink_users],
        };
        matched_c += sum_rate(&state, &a, &cfg).unwrap().sum_rate;
    }
    println!(
        "desk profile: random C = {:.3}, matched C = {:.3}, upper bound = {:.3}",
        random_c / n as f64,
        matched_c / n as f64,
        bound / n as f64
    );
}
