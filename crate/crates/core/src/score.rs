//! Scalar preference over the KPI triple.

use serde::{Deserialize, Serialize};

use crate::sim::Kpis;

/// Weights of `alpha * THP/thp_ref + beta * JFI - delta * PDR`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Preference {
    pub alpha: f64,
    pub beta: f64,
    pub delta: f64,
}

impl Default for Preference {
    fn default() -> Self {
        Self {
            alpha: 1.0,
            beta: 1.0,
            delta: 1.0,
        }
    }
}

impl Preference {
    pub fn score(&self, kpis: &Kpis, thp_ref: f64) -> f64 {
        let thp = if thp_ref > 0.0 { kpis.thp / thp_ref } else { 0.0 };
        self.alpha * thp + self.beta * kpis.jfi - self.delta * kpis.pdr
    }
}

/// Throughput of a cell whose every RBG runs the top MCS, bits/s. The
/// common normalization for comparing methods on one config.
pub fn max_throughput(cfg: &crate::sim::SimConfig) -> f64 {
    cfg.max_tti_service() as f64 / cfg.tti_duration
}
