//! Simulation configuration.
//!
//! The on-disk format is TOML with dotted section keys, for example
//!
//! ```toml
//! scenario.inter_ap_distance_m = 20
//! traffic.broadband_load_mbps = 100
//! psr.enabled = true
//! ```
//!
//! Every key is optional; an empty file yields the reference deployment
//! (d = 20 m, 100 Mbps broadband load, 4 AP antennas, PSR off). Unknown keys
//! are rejected.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::ConfigError;
use crate::phy::DEFAULT_MIN_SNR_DB;
use crate::scenario::TrafficClass;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    pub scenario: ScenarioConfig,
    pub channel: ChannelConfig,
    pub phy: PhyConfig,
    pub psr: PsrConfig,
    pub traffic: TrafficConfig,
    pub sim: RunConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    /// Inter-AP distance `d`; the room is `n_aps * d` by `d`.
    pub inter_ap_distance_m: f64,
    pub n_aps: usize,
    pub ap_height_m: f64,
    pub sta_height_m: f64,
    pub n_broadband_stas: usize,
    pub n_lowlatency_stas: usize,
    pub ap_antennas: usize,
    pub sta_antennas: usize,
    pub ap_max_tx_power_dbm: f64,
    pub sta_max_tx_power_dbm: f64,
    pub ap_noise_figure_db: f64,
    pub sta_noise_figure_db: f64,
    pub sensitivity_dbm: f64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            inter_ap_distance_m: 20.0,
            n_aps: 3,
            ap_height_m: 3.0,
            sta_height_m: 1.0,
            n_broadband_stas: 16,
            n_lowlatency_stas: 8,
            ap_antennas: 4,
            sta_antennas: 1,
            ap_max_tx_power_dbm: 24.0,
            sta_max_tx_power_dbm: 15.0,
            ap_noise_figure_db: 7.0,
            sta_noise_figure_db: 9.0,
            sensitivity_dbm: -90.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChannelConfig {
    pub carrier_ghz: f64,
    pub bandwidth_mhz: u32,
    pub fading_enabled: bool,
    pub los_sigma_db: f64,
    pub nlos_sigma_db: f64,
}

impl Default for ChannelConfig {
    fn default() -> Self {
        ChannelConfig {
            carrier_ghz: 5.18,
            bandwidth_mhz: 80,
            fading_enabled: true,
            los_sigma_db: 3.0,
            nlos_sigma_db: 8.03,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PhyConfig {
    /// Minimum SNR (dB) for at most 10% PER, MCS 0 through 11.
    pub min_snr_db: Vec<f64>,
}

impl Default for PhyConfig {
    fn default() -> Self {
        PhyConfig { min_snr_db: DEFAULT_MIN_SNR_DB.to_vec() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PsrConfig {
    pub enabled: bool,
    pub safety_margin_db: f64,
    pub grabber_classes: Vec<TrafficClass>,
}

impl Default for PsrConfig {
    fn default() -> Self {
        PsrConfig { enabled: false, safety_margin_db: 3.0, grabber_classes: vec![TrafficClass::LowLatency] }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrafficConfig {
    /// Aggregate offered load of all broadband STAs, split evenly.
    pub broadband_load_mbps: f64,
    pub broadband_file_bytes: u32,
    pub lowlatency_file_bytes: u32,
    pub lowlatency_period_ms: f64,
}

impl Default for TrafficConfig {
    fn default() -> Self {
        TrafficConfig {
            broadband_load_mbps: 100.0,
            broadband_file_bytes: 500_000,
            lowlatency_file_bytes: 32,
            lowlatency_period_ms: 10.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub duration_s: f64,
    pub drops: usize,
    pub seed: u64,
    /// Files arriving before this time are simulated but not reported.
    pub warmup_ms: f64,
    /// Run the drops of a campaign on a thread pool.
    pub parallel: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig { duration_s: 2.0, drops: 10, seed: 1, warmup_ms: 0.0, parallel: true }
    }
}

impl SimConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, ConfigError> {
        let cfg: SimConfig = toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ConfigError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError::Io { path: path.display().to_string(), reason: e.to_string() })?;
        Self::from_toml_str(&text)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let s = &self.scenario;
        if !(s.inter_ap_distance_m.is_finite() && s.inter_ap_distance_m > 0.0) {
            return Err(ConfigError::invalid("scenario.inter_ap_distance_m", "must be > 0"));
        }
        if s.n_aps == 0 {
            return Err(ConfigError::invalid("scenario.n_aps", "must be >= 1"));
        }
        if s.ap_antennas == 0 {
            return Err(ConfigError::invalid("scenario.ap_antennas", "must be >= 1"));
        }
        if s.sta_antennas == 0 {
            return Err(ConfigError::invalid("scenario.sta_antennas", "must be >= 1"));
        }
        if !(s.ap_height_m >= 0.0 && s.sta_height_m >= 0.0) {
            return Err(ConfigError::invalid("scenario.ap_height_m", "heights must be >= 0"));
        }
        let c = &self.channel;
        if !(c.carrier_ghz.is_finite() && c.carrier_ghz > 0.0) {
            return Err(ConfigError::invalid("channel.carrier_ghz", "must be > 0"));
        }
        if !matches!(c.bandwidth_mhz, 20 | 40 | 80) {
            return Err(ConfigError::invalid("channel.bandwidth_mhz", "must be one of 20, 40, 80"));
        }
        if c.los_sigma_db < 0.0 || c.nlos_sigma_db < 0.0 {
            return Err(ConfigError::invalid("channel.los_sigma_db", "shadowing sigma must be >= 0"));
        }
        let p = &self.phy;
        if p.min_snr_db.len() != 12 {
            return Err(ConfigError::invalid("phy.min_snr_db", "need exactly 12 entries (MCS 0..11)"));
        }
        if p.min_snr_db.windows(2).any(|w| w[1] <= w[0]) {
            return Err(ConfigError::invalid("phy.min_snr_db", "must be strictly increasing"));
        }
        crate::psr::validate_safety_margin(self.psr.safety_margin_db)?;
        let t = &self.traffic;
        if !(t.broadband_load_mbps.is_finite() && t.broadband_load_mbps >= 0.0) {
            return Err(ConfigError::invalid("traffic.broadband_load_mbps", "must be >= 0"));
        }
        if t.broadband_file_bytes == 0 {
            return Err(ConfigError::invalid("traffic.broadband_file_bytes", "must be > 0"));
        }
        if t.lowlatency_file_bytes == 0 {
            return Err(ConfigError::invalid("traffic.lowlatency_file_bytes", "must be > 0"));
        }
        if !(t.lowlatency_period_ms.is_finite() && t.lowlatency_period_ms > 0.0) {
            return Err(ConfigError::invalid("traffic.lowlatency_period_ms", "must be > 0"));
        }
        let r = &self.sim;
        if !(r.duration_s.is_finite() && r.duration_s > 0.0) {
            return Err(ConfigError::invalid("sim.duration_s", "must be > 0"));
        }
        if r.drops == 0 {
            return Err(ConfigError::invalid("sim.drops", "must be >= 1"));
        }
        if !(r.warmup_ms.is_finite() && r.warmup_ms >= 0.0) {
            return Err(ConfigError::invalid("sim.warmup_ms", "must be >= 0"));
        }
        Ok(())
    }
}
