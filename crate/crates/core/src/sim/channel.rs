//! Block-fading channel: per-UE mean SNR plus i.i.d. Rayleigh fading per RBG.

use rand::Rng;
use rand_distr::{Distribution, Exp1};
use serde::{Deserialize, Serialize};

use super::SimConfig;

/// Fading power floor, keeps deep fades finite (-60 dB).
const MIN_FADING_POWER: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChannelState {
    /// Row-major `num_ues x num_rbgs`, dB.
    pub snr: Vec<f64>,
    /// TTIs until the next redraw. Unused for a static channel.
    pub block_counter: u32,
}

impl ChannelState {
    pub fn initial<R: Rng + ?Sized>(cfg: &SimConfig, rng: &mut R) -> Self {
        let mut snr = vec![0.0; cfg.num_ues * cfg.num_rbgs];
        redraw(cfg, &mut snr, rng);
        Self {
            snr,
            block_counter: cfg.doppler_block_len.unwrap_or(0),
        }
    }

    pub fn snr(&self, num_rbgs: usize, ue: usize, rbg: usize) -> f64 {
        self.snr[ue * num_rbgs + rbg]
    }
}

fn redraw<R: Rng + ?Sized>(cfg: &SimConfig, snr: &mut [f64], rng: &mut R) {
    let b = cfg.num_rbgs;
    for (k, mean) in cfg.mean_snr_per_ue.iter().enumerate() {
        for v in &mut snr[k * b..(k + 1) * b] {
            let power: f64 = Exp1.sample(rng);
            *v = mean + 10.0 * power.max(MIN_FADING_POWER).log10();
        }
    }
}

/// Advance one TTI: redraw when the coherence block ends, else count down.
pub fn channel_step<R: Rng + ?Sized>(cfg: &SimConfig, state: &mut ChannelState, rng: &mut R) {
    let Some(block_len) = cfg.doppler_block_len else {
        return;
    };
    if state.block_counter <= 1 {
        redraw(cfg, &mut state.snr, rng);
        state.block_counter = block_len;
    } else {
        state.block_counter -= 1;
    }
}
