//! Per-TTI records and the window KPIs: throughput, Jain fairness, drop rate.

use serde::{Deserialize, Serialize};

/// What happened in one TTI.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct KpiRecord {
    pub tti: u64,
    /// Delivered bits per UE (transmissions that failed deliver nothing).
    pub served_bits: Vec<u64>,
    /// Packets whose last bit was delivered this TTI.
    pub sent_packets: Vec<u64>,
    /// Overflow plus expiry drops per UE.
    pub dropped_packets: Vec<u64>,
    pub dropped_overflow: Vec<u64>,
    pub dropped_expired: Vec<u64>,
    pub arrived_packets: Vec<u64>,
}

impl KpiRecord {
    pub fn empty(tti: u64, num_ues: usize) -> Self {
        Self {
            tti,
            served_bits: vec![0; num_ues],
            sent_packets: vec![0; num_ues],
            dropped_packets: vec![0; num_ues],
            dropped_overflow: vec![0; num_ues],
            dropped_expired: vec![0; num_ues],
            arrived_packets: vec![0; num_ues],
        }
    }

    pub fn total_served_bits(&self) -> u64 {
        self.served_bits.iter().sum()
    }

    pub fn total_dropped(&self) -> u64 {
        self.dropped_packets.iter().sum()
    }
}

/// The objective triple over a window.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Kpis {
    /// Bits per second.
    pub thp: f64,
    pub jfi: f64,
    /// Dropped over arrived packets, 0 when nothing arrived.
    pub pdr: f64,
}

/// Jain's index of per-UE cumulative bits.
///
/// Zero when nothing was served: an idle window is not "perfectly fair".
pub fn jain_index(bits: &[f64]) -> f64 {
    let sum: f64 = bits.iter().sum();
    let sum_sq: f64 = bits.iter().map(|b| b * b).sum();
    if sum_sq <= 0.0 {
        return 0.0;
    }
    sum * sum / (bits.len() as f64 * sum_sq)
}

/// Cumulative counters since the start of a KPI window.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct WindowAccum {
    pub ttis: u64,
    pub served_bits: Vec<u64>,
    pub dropped: Vec<u64>,
    pub arrived: Vec<u64>,
}

impl WindowAccum {
    pub fn new(num_ues: usize) -> Self {
        Self {
            ttis: 0,
            served_bits: vec![0; num_ues],
            dropped: vec![0; num_ues],
            arrived: vec![0; num_ues],
        }
    }

    pub fn add(&mut self, rec: &KpiRecord) {
        self.ttis += 1;
        for k in 0..self.served_bits.len() {
            self.served_bits[k] += rec.served_bits[k];
            self.dropped[k] += rec.dropped_packets[k];
            self.arrived[k] += rec.arrived_packets[k];
        }
    }

    pub fn jfi(&self) -> f64 {
        let bits: Vec<f64> = self.served_bits.iter().map(|&b| b as f64).collect();
        jain_index(&bits)
    }

    pub fn kpis(&self, tti_duration: f64) -> Kpis {
        let served: u64 = self.served_bits.iter().sum();
        let dropped: u64 = self.dropped.iter().sum();
        let arrived: u64 = self.arrived.iter().sum();
        let thp = if self.ttis == 0 {
            0.0
        } else {
            served as f64 / (self.ttis as f64 * tti_duration)
        };
        let pdr = if arrived == 0 {
            0.0
        } else {
            dropped as f64 / arrived as f64
        };
        Kpis {
            thp,
            jfi: self.jfi(),
            pdr,
        }
    }
}

/// Fold a window of records into its KPIs.
///
/// # Panics
/// On an empty window.
pub fn compute_kpis(records: &[KpiRecord], num_ues: usize, tti_duration: f64) -> Kpis {
    assert!(!records.is_empty(), "KPI window must be nonempty");
    let mut acc = WindowAccum::new(num_ues);
    for r in records {
        acc.add(r);
    }
    acc.kpis(tti_duration)
}
