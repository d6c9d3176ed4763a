//! Adaptive modulation and coding with outer-loop link adaptation (OLLA).
//!
//! The MCS is chosen on the offset-corrected SNR `snr - offset`. The block
//! error probability of the chosen MCS follows a logistic curve in the margin
//! of the *true* SNR over that MCS threshold, so the offset only acts through
//! the MCS choice and OLLA has something to regulate.

use serde::{Deserialize, Serialize};

use super::{McsEntry, SimConfig};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LinkChoice {
    /// `None` when the SNR is below every threshold: nothing is sent.
    pub mcs: Option<usize>,
    /// Bits carried by one RBG in one TTI.
    pub rate: u64,
    pub bler: f64,
}

impl LinkChoice {
    /// Expected delivered bits, `rate * (1 - bler)`.
    pub fn expected_bits(&self) -> f64 {
        self.rate as f64 * (1.0 - self.bler)
    }
}

pub fn link_adapt(
    snr_db: f64,
    olla_offset: f64,
    mcs_table: &[McsEntry],
    rbg_symbols: f64,
    bler_slope: f64,
) -> LinkChoice {
    let effective = snr_db - olla_offset;
    // Highest index whose threshold is <= effective (table ascending).
    let idx = mcs_table.partition_point(|m| m.min_snr_db <= effective);
    if idx == 0 {
        return LinkChoice {
            mcs: None,
            rate: 0,
            bler: 1.0,
        };
    }
    let mcs = idx - 1;
    let entry = &mcs_table[mcs];
    let margin = snr_db - entry.min_snr_db;
    LinkChoice {
        mcs: Some(mcs),
        rate: (entry.spectral_efficiency * rbg_symbols).floor() as u64,
        bler: 1.0 / (1.0 + (bler_slope * margin).exp()),
    }
}

/// Per-UE OLLA offsets in dB. Positive offsets make the MCS choice more
/// conservative.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinkAdaptState {
    pub olla_offset: Vec<f64>,
}

impl LinkAdaptState {
    pub fn new(num_ues: usize) -> Self {
        Self {
            olla_offset: vec![0.0; num_ues],
        }
    }

    pub fn choice(&self, cfg: &SimConfig, ue: usize, snr_db: f64) -> LinkChoice {
        link_adapt(
            snr_db,
            self.olla_offset[ue],
            &cfg.mcs_table,
            cfg.rbg_symbols,
            cfg.bler_slope,
        )
    }

    /// NACK raises the offset by `olla_step_up`, ACK lowers it by the
    /// step that balances at `target_bler`.
    pub fn olla_update(&mut self, ue: usize, ack: bool, cfg: &SimConfig) {
        if ack {
            self.olla_offset[ue] -= cfg.olla_step_down();
        } else {
            self.olla_offset[ue] += cfg.olla_step_up;
        }
    }
}
