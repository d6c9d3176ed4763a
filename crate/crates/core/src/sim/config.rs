use serde::{Deserialize, Serialize};

use super::SimError;

/// One row of the modulation-and-coding table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct McsEntry {
    /// Lowest (offset-corrected) SNR at which this MCS may be chosen, dB.
    pub min_snr_db: f64,
    /// Bits per modulated symbol.
    pub spectral_efficiency: f64,
}

/// Static description of one cell: UEs, resources, traffic, link adaptation.
///
/// Field names double as the keys of the `[sim]` table in experiment config
/// files. Unknown keys are rejected.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    pub num_ues: usize,
    pub num_rbgs: usize,
    /// Mean packet arrivals per TTI per UE (Poisson).
    pub arrival_rate: f64,
    /// Packet size in bits.
    pub packet_size: u32,
    /// Buffer capacity in packets.
    pub buffer_capacity: usize,
    /// Packets waiting this many TTIs are dropped.
    pub max_delay: u32,
    pub target_bler: f64,
    pub olla_step_up: f64,
    /// Defaults to `olla_step_up * target_bler / (1 - target_bler)`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub olla_step_down: Option<f64>,
    /// PF averaging window, TTIs.
    pub ema_time_constant: f64,
    /// Seconds per TTI.
    pub tti_duration: f64,
    pub mcs_table: Vec<McsEntry>,
    /// Modulated symbols per RBG per TTI.
    pub rbg_symbols: f64,
    /// Slope of the logistic BLER curve, 1/dB.
    pub bler_slope: f64,
    pub mean_snr_per_ue: Vec<f64>,
    /// Channel coherence in TTIs. `None` keeps the first realization forever.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub doppler_block_len: Option<u32>,
    pub rng_seed: u64,
}

/// Approximate LTE 4-bit CQI table (spectral efficiency) with switching points.
pub fn lte_mcs_table() -> Vec<McsEntry> {
    const ROWS: [(f64, f64); 15] = [
        (-6.7, 0.1523),
        (-4.7, 0.2344),
        (-2.3, 0.3770),
        (0.2, 0.6016),
        (2.4, 0.8770),
        (4.3, 1.1758),
        (5.9, 1.4766),
        (8.1, 1.9141),
        (10.3, 2.4063),
        (11.7, 2.7305),
        (14.1, 3.3223),
        (16.3, 3.9023),
        (18.7, 4.5234),
        (21.0, 5.1152),
        (22.7, 5.5547),
    ];
    ROWS.iter()
        .map(|&(min_snr_db, spectral_efficiency)| McsEntry {
            min_snr_db,
            spectral_efficiency,
        })
        .collect()
}

/// Per-UE per-TTI arrival rate giving roughly 1.2x the PF capacity of a
/// single-RBG cell at the default constants (see `calibrate_arrival_rate`,
/// which produced this value on the evenly spread 0..20 dB deployment).
pub const DEFAULT_ARRIVAL_RATE_PER_RBG: f64 = 0.151;

impl SimConfig {
    /// Desk-scale defaults for `num_ues` UEs on `num_rbgs` RBGs.
    ///
    /// Mean SNRs are spread evenly over 0..20 dB; the arrival rate scales
    /// with the number of RBGs so the offered load stays near 1.2x PF capacity.
    pub fn desk_scale(num_ues: usize, num_rbgs: usize) -> Self {
        let mean_snr_per_ue = (0..num_ues)
            .map(|k| {
                if num_ues == 1 {
                    10.0
                } else {
                    20.0 * k as f64 / (num_ues - 1) as f64
                }
            })
            .collect();
        Self {
            num_ues,
            num_rbgs,
            arrival_rate: DEFAULT_ARRIVAL_RATE_PER_RBG * num_rbgs as f64,
            packet_size: 4096,
            buffer_capacity: 20,
            max_delay: 50,
            target_bler: 0.1,
            olla_step_up: 0.5,
            olla_step_down: None,
            ema_time_constant: 100.0,
            tti_duration: 1e-3,
            mcs_table: lte_mcs_table(),
            rbg_symbols: 1000.0,
            bler_slope: 1.5,
            mean_snr_per_ue,
            doppler_block_len: Some(1),
            rng_seed: 0,
        }
    }

    pub fn from_toml_str(text: &str) -> Result<Self, SimError> {
        let cfg: SimConfig = toml::from_str(text).map_err(|e| SimError::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("SimConfig is always representable as TOML")
    }

    pub fn olla_step_down(&self) -> f64 {
        self.olla_step_down
            .unwrap_or(self.olla_step_up * self.target_bler / (1.0 - self.target_bler))
    }

    /// Bits one RBG carries at the highest MCS.
    pub fn max_rbg_rate(&self) -> u64 {
        self.mcs_table
            .iter()
            .map(|m| (m.spectral_efficiency * self.rbg_symbols).floor() as u64)
            .max()
            .unwrap_or(0)
    }

    /// Bits one TTI can carry with every RBG at the highest MCS.
    pub fn max_tti_service(&self) -> u64 {
        self.max_rbg_rate() * self.num_rbgs as u64
    }

    /// PF EMA floor: one packet per 10^4 TTIs.
    pub fn ema_floor(&self) -> f64 {
        self.packet_size as f64 / 1e4
    }

    /// Stable 64-bit identity of the configuration, used to tie snapshots
    /// and traces to the config that produced them.
    pub fn fingerprint(&self) -> u64 {
        let bytes = bincode::serialize(self).expect("SimConfig serializes");
        fnv1a(&bytes)
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |field: &'static str, reason: &str| {
            Err(SimError::InvalidConfig {
                field,
                reason: reason.to_string(),
            })
        };
        if self.num_ues == 0 {
            return bad("num_ues", "must be at least 1");
        }
        if self.num_rbgs == 0 {
            return bad("num_rbgs", "must be at least 1");
        }
        if !(self.arrival_rate >= 0.0 && self.arrival_rate.is_finite()) {
            return bad("arrival_rate", "must be finite and non-negative");
        }
        if self.packet_size == 0 {
            return bad("packet_size", "must be positive");
        }
        if self.buffer_capacity == 0 {
            return bad("buffer_capacity", "must be at least 1");
        }
        if self.max_delay == 0 {
            return bad("max_delay", "must be at least 1");
        }
        if !(self.target_bler > 0.0 && self.target_bler < 1.0) {
            return bad("target_bler", "must lie in (0, 1)");
        }
        if !(self.olla_step_up >= 0.0 && self.olla_step_up.is_finite()) {
            return bad("olla_step_up", "must be finite and non-negative");
        }
        if let Some(down) = self.olla_step_down {
            if !(down >= 0.0 && down.is_finite()) {
                return bad("olla_step_down", "must be finite and non-negative");
            }
        }
        if !(self.ema_time_constant >= 1.0) {
            return bad("ema_time_constant", "must be at least 1");
        }
        if !(self.tti_duration > 0.0) {
            return bad("tti_duration", "must be positive");
        }
        if self.mcs_table.is_empty() {
            return bad("mcs_table", "must not be empty");
        }
        if self
            .mcs_table
            .windows(2)
            .any(|w| !(w[0].min_snr_db < w[1].min_snr_db))
        {
            return bad("mcs_table", "must be sorted ascending by min_snr_db");
        }
        if self
            .mcs_table
            .iter()
            .any(|m| !m.min_snr_db.is_finite() || !(m.spectral_efficiency > 0.0))
        {
            return bad("mcs_table", "entries need finite thresholds and positive efficiency");
        }
        if !(self.rbg_symbols > 0.0) {
            return bad("rbg_symbols", "must be positive");
        }
        if !(self.bler_slope > 0.0 && self.bler_slope.is_finite()) {
            return bad("bler_slope", "must be positive");
        }
        if self.mean_snr_per_ue.len() != self.num_ues {
            return bad("mean_snr_per_ue", "needs exactly num_ues entries");
        }
        if self.mean_snr_per_ue.iter().any(|s| !s.is_finite()) {
            return bad("mean_snr_per_ue", "entries must be finite");
        }
        if self.doppler_block_len == Some(0) {
            return bad("doppler_block_len", "must be at least 1 (omit for a static channel)");
        }
        Ok(())
    }
}

pub(crate) fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}
