//! Deterministic TTI-level downlink simulator.

mod channel;
mod config;
mod env;
mod kpi;
mod link;
mod trace;
mod traffic;

pub use channel::{channel_step, ChannelState};
pub use config::{lte_mcs_table, McsEntry, SimConfig, DEFAULT_ARRIVAL_RATE_PER_RBG};
pub use env::{stable_hash, Decision, Env, EnvState, SnapshotBlob, TtiDraws};
pub use kpi::{compute_kpis, jain_index, KpiRecord, Kpis, WindowAccum};
pub use link::{link_adapt, LinkAdaptState, LinkChoice};
pub use trace::GenieTrace;
pub use traffic::{draw_arrivals, Drain, Packet, UeBuffer};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid config field `{field}`: {reason}")]
    InvalidConfig { field: &'static str, reason: String },
    #[error("config parse error: {0}")]
    Parse(String),
    #[error("decision has {found} RBG entries, expected {expected}")]
    DecisionShape { expected: usize, found: usize },
    #[error("RBG {rbg} assigned to unknown UE {ue}")]
    UnknownUe { ue: usize, rbg: usize },
    #[error("RBG {rbg} assigned to UE {ue} whose buffer is empty")]
    EmptyBufferAssignment { ue: usize, rbg: usize },
    #[error("trace exhausted")]
    TraceExhausted,
    #[error("trace length must be at least 1")]
    EmptyTrace,
    #[error("trace starts at TTI {found}, environment is at TTI {expected}")]
    TraceMismatch { expected: u64, found: u64 },
    #[error("snapshot or trace belongs to a different SimConfig")]
    IncompatibleConfig,
    #[error("unsupported format version {0}")]
    UnsupportedVersion(u32),
    #[error("corrupt data: {0}")]
    Corrupt(String),
}
