use super::EnvError;

/// Physical scenario constants for the full-duplex cell.
///
/// `ref_gain` is the pathloss power gain at the 1 m reference distance, so a
/// link at distance `d` has power gain `ref_gain · d^{-pathloss_exponent}`
/// and channel amplitude equal to its square root. Noise powers are total
/// receiver noise in a normalized 1 Hz band, which keeps rates in bits/s/Hz.
#[derive(Debug, Clone, PartialEq)]
pub struct EnvConfig {
    pub cell_radius_m: f64,
    pub bs_height_m: f64,
    /// K downlink users.
    pub downlink_users: usize,
    /// L uplink users.
    pub uplink_users: usize,
    pub tx_antennas: usize,
    pub rx_antennas: usize,
    pub pathloss_exponent: f64,
    pub ref_gain: f64,
    /// σ_k², per downlink receiver (watts).
    pub noise_dl_w: f64,
    /// σ_r², at the BS receive array (watts).
    pub noise_ul_w: f64,
    /// P_max, BS transmit power budget (watts).
    pub max_bs_power_w: f64,
    /// P_l, per-uplink-user power budget (watts).
    pub max_ul_power_w: f64,
    pub interferer_angles_deg: Vec<f64>,
    /// |β_f|²/σ_r² for every interferer, in dB.
    pub interferer_gain_db: f64,
    /// T, environment interactions per epoch.
    pub steps_per_epoch: usize,
    /// Steps between episode resets (fresh user placement); the undiscounted
    /// return is bounded by this horizon. Clamped to `steps_per_epoch`.
    pub episode_length: usize,
    /// Planar RMS displacement of the per-step random walk (meters).
    pub mobility_step_m: f64,
    /// Inner radius of the user annulus (meters).
    pub min_user_distance_m: f64,
}

impl Default for EnvConfig {
    fn default() -> Self {
        Self {
            cell_radius_m: 300.0,
            bs_height_m: 100.0,
            downlink_users: 6,
            uplink_users: 4,
            tx_antennas: 6,
            rx_antennas: 6,
            pathloss_exponent: 3.6,
            ref_gain: 4.16e-6,
            noise_dl_w: noise_watts_from_dbm(-97.0),
            noise_ul_w: noise_watts_from_dbm(-97.0),
            max_bs_power_w: 3.0,
            max_ul_power_w: 1.0,
            interferer_angles_deg: vec![-50.0, 20.0],
            interferer_gain_db: 20.0,
            steps_per_epoch: 16,
            episode_length: 16,
            mobility_step_m: 1.0,
            min_user_distance_m: 10.0,
        }
    }
}

/// dBm (per 1 Hz band) to watts.
pub fn noise_watts_from_dbm(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

impl EnvConfig {
    pub fn validate(&self) -> Result<(), EnvError> {
        let positive = [
            ("cell_radius_m", self.cell_radius_m),
            ("bs_height_m", self.bs_height_m),
            ("ref_gain", self.ref_gain),
            ("noise_dl_w", self.noise_dl_w),
            ("noise_ul_w", self.noise_ul_w),
            ("max_bs_power_w", self.max_bs_power_w),
            ("max_ul_power_w", self.max_ul_power_w),
            ("min_user_distance_m", self.min_user_distance_m),
        ];
        for (name, v) in positive {
            if !(v > 0.0) || !v.is_finite() {
                return Err(EnvError::InvalidConfig(format!("{name} must be > 0, got {v}")));
            }
        }
        if self.downlink_users == 0
            || self.uplink_users == 0
            || self.tx_antennas == 0
            || self.rx_antennas == 0
        {
            return Err(EnvError::InvalidConfig(
                "user and antenna counts must be >= 1".into(),
            ));
        }
        if !(self.pathloss_exponent > 2.0) {
            return Err(EnvError::InvalidConfig(format!(
                "pathloss_exponent must be > 2, got {}",
                self.pathloss_exponent
            )));
        }
        if self.min_user_distance_m >= self.cell_radius_m {
            return Err(EnvError::InvalidConfig(
                "min_user_distance_m must be below cell_radius_m".into(),
            ));
        }
        if self.mobility_step_m < 0.0 {
            return Err(EnvError::InvalidConfig("mobility_step_m must be >= 0".into()));
        }
        if self.steps_per_epoch == 0 || self.episode_length == 0 {
            return Err(EnvError::InvalidConfig(
                "steps_per_epoch and episode_length must be >= 1".into(),
            ));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid_and_match_the_reference_setup() {
        let cfg = EnvConfig::default();
        cfg.validate().unwrap();
        assert_eq!(cfg.downlink_users, 6);
        assert_eq!(cfg.uplink_users, 4);
        assert_eq!(cfg.tx_antennas, 6);
        // -97 dBm in a 1 Hz band
        assert!((cfg.noise_ul_w - 10f64.powf(-12.7)).abs() < 1e-20);
    }

    #[test]
    fn invalid_configs_are_rejected() {
        let mut cfg = EnvConfig { downlink_users: 0, ..EnvConfig::default() };
        assert!(cfg.validate().is_err());
        cfg = EnvConfig { pathloss_exponent: 1.5, ..EnvConfig::default() };
        assert!(cfg.validate().is_err());
        cfg = EnvConfig { max_bs_power_w: 0.0, ..EnvConfig::default() };
        assert!(cfg.validate().is_err());
    }
}
