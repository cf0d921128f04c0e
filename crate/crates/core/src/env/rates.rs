use super::{ChannelState, EnvConfig, EnvError, NetworkAction};
use crate::numerics::{herm_inner, quadratic_form, ComplexMatrix};
use num_complex::Complex64;

/// Per-user SNR/SINRs plus the resulting spectral efficiency.
#[derive(Debug, Clone, PartialEq)]
pub struct RateReport {
    pub dl_snr: Vec<f64>,
    pub ul_sinr: Vec<f64>,
    /// C = Σ log₂(1+γ_UL) + Σ log₂(1+γ_DL), bits/s/Hz.
    pub sum_rate: f64,
}

fn check_dims(state: &ChannelState, action: &NetworkAction, cfg: &EnvConfig) -> Result<(), EnvError> {
    if state.dl_channels.len() != cfg.downlink_users
        || state.ul_channels.len() != cfg.uplink_users
        || action.tx_beams.len() != cfg.downlink_users
        || action.rx_beams.len() != cfg.uplink_users
        || action.ul_powers.len() != cfg.uplink_users
    {
        return Err(EnvError::DimensionMismatch(format!(
            "state {}/{} users, action {}/{} beams vs config {}/{}",
            state.dl_channels.len(),
            state.ul_channels.len(),
            action.tx_beams.len(),
            action.rx_beams.len(),
            cfg.downlink_users,
            cfg.uplink_users
        )));
    }
    Ok(())
}

/// Downlink SNR per user: `|g_kᴴ v_k|² / σ_k²`.
pub fn downlink_snr(
    state: &ChannelState,
    action: &NetworkAction,
    cfg: &EnvConfig,
) -> Result<Vec<f64>, EnvError> {
    check_dims(state, action, cfg)?;
    Ok(state
        .dl_channels
        .iter()
        .zip(&action.tx_beams)
        .map(|(g, v)| herm_inner(g, v).norm_sqr() / cfg.noise_dl_w)
        .collect())
}

/// Uplink SINR per user:
/// `p_l |w_lᴴ h_l|² / wᴴ(Σ_{l'≠l} p_{l'} h h ᴴ + G Q Gᴴ + σ_r² I)w`
/// with `Q = Σ_k v_k v_kᴴ`. Zero whenever the numerator vanishes, and
/// invariant to rescaling `w_l`.
pub fn uplink_sinr(
    state: &ChannelState,
    action: &NetworkAction,
    cfg: &EnvConfig,
) -> Result<Vec<f64>, EnvError> {
    check_dims(state, action, cfg)?;
    let nr = cfg.rx_antennas;
    // Downlink signal covariance Q, then the clutter-coupled term G Q Gᴴ.
    let mut q = ComplexMatrix::zeros(cfg.tx_antennas, cfg.tx_antennas);
    for v in &action.tx_beams {
        q.add_assign(&ComplexMatrix::outer(v, v))?;
    }
    let gq = state.clutter.matmul(&q)?;
    let clutter_cov = gq.matmul(&state.clutter.hermitian())?;

    let mut base = clutter_cov.add(&ComplexMatrix::scaled_identity(nr, cfg.noise_ul_w))?;
    for (l, h) in state.ul_channels.iter().enumerate() {
        base.add_assign(&ComplexMatrix::outer(h, h).scale(action.ul_powers[l].into()))?;
    }

    let mut out = Vec::with_capacity(cfg.uplink_users);
    for l in 0..cfg.uplink_users {
        let w = &action.rx_beams[l];
        let h = &state.ul_channels[l];
        let p = action.ul_powers[l];
        let numerator = p * herm_inner(w, h).norm_sqr();
        if numerator <= 0.0 {
            out.push(0.0);
            continue;
        }
        // base holds every user's term; remove user l's own contribution.
        let own = ComplexMatrix::outer(h, h).scale(Complex64::from(-p));
        let denom_m = base.add(&own)?;
        let denominator = quadratic_form(w, &denom_m)?;
        out.push(numerator / denominator);
    }
    Ok(out)
}

/// Worst-case violation of the power constraints: the BS budget
/// `Σ‖v_k‖² ≤ P_max` and the per-user bounds `0 ≤ p_l ≤ P_l`.
pub fn power_residual(action: &NetworkAction, cfg: &EnvConfig) -> f64 {
    let v_power: f64 = action
        .tx_beams
        .iter()
        .flat_map(|v| v.iter())
        .map(|z| z.norm_sqr())
        .sum();
    let mut residual = (v_power - cfg.max_bs_power_w).max(0.0);
    for p in &action.ul_powers {
        residual = residual.max(*p - cfg.max_ul_power_w).max(-*p);
    }
    residual
}

/// Evaluates an action's rates and sum rate. Rejects actions violating the
/// power constraints by more than 1e-9 — callers are expected to project
/// raw actions first.
pub fn sum_rate(
    state: &ChannelState,
    action: &NetworkAction,
    cfg: &EnvConfig,
) -> Result<RateReport, EnvError> {
    let residual = power_residual(action, cfg);
    if residual > 1e-9 {
        return Err(EnvError::InfeasibleAction(residual));
    }
    let dl_snr = downlink_snr(state, action, cfg)?;
    let ul_sinr = uplink_sinr(state, action, cfg)?;
    let sum_rate = dl_snr
        .iter()
        .chain(ul_sinr.iter())
        .map(|g| (1.0 + g).log2())
        .sum();
    Ok(RateReport { dl_snr, ul_sinr, sum_rate })
}
