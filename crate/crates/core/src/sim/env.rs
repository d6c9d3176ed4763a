//! The TTI-stepped downlink environment.
//!
//! Exogenous randomness (channel, transmission-success uniforms, arrivals)
//! is drawn one TTI ahead and never depends on scheduling decisions. Live
//! simulation and replay of a pre-generated [`GenieTrace`] therefore consume
//! the same values in the same order, and two environments restored from one
//! snapshot see identical futures whatever they schedule.

use std::hash::{Hash, Hasher};
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::channel::{channel_step, ChannelState};
use super::config::fnv1a;
use super::kpi::{KpiRecord, Kpis, WindowAccum};
use super::link::{LinkAdaptState, LinkChoice};
use super::trace::GenieTrace;
use super::traffic::{draw_arrivals, UeBuffer};
use super::{SimConfig, SimError};
use crate::sched::ema_update;

/// Per-RBG allocation for one TTI: at most one UE per RBG.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Decision {
    pub assignment: Vec<Option<usize>>,
}

impl Decision {
    pub fn idle(num_rbgs: usize) -> Self {
        Self {
            assignment: vec![None; num_rbgs],
        }
    }

    /// Every RBG to the same UE (or idle).
    pub fn uniform(num_rbgs: usize, ue: Option<usize>) -> Self {
        Self {
            assignment: vec![ue; num_rbgs],
        }
    }

    pub fn is_idle(&self) -> bool {
        self.assignment.iter().all(Option::is_none)
    }
}

/// Exogenous values consumed by one TTI.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TtiDraws {
    /// Row-major `num_ues x num_rbgs`, dB, valid during this TTI.
    pub snr: Vec<f64>,
    /// Row-major `num_ues x num_rbgs` in [0, 1): success iff `u >= bler`.
    pub uniforms: Vec<f64>,
    /// New packets per UE, admitted at the end of the TTI.
    pub arrivals: Vec<u32>,
}

impl TtiDraws {
    fn hash_into(&self, mut h: u64) -> u64 {
        let mut mix = |x: u64| {
            h ^= x;
            h = h.wrapping_mul(0x0000_0100_0000_01b3);
        };
        for v in self.snr.iter().chain(&self.uniforms) {
            mix(v.to_bits());
        }
        for &a in &self.arrivals {
            mix(a as u64);
        }
        h
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
enum ExoSource {
    Live {
        rng: ChaCha8Rng,
        channel: ChannelState,
        pending: TtiDraws,
    },
    Trace {
        trace: Arc<GenieTrace>,
        cursor: usize,
    },
}

fn draw_tti(cfg: &SimConfig, rng: &mut ChaCha8Rng, channel: &mut ChannelState) -> TtiDraws {
    let n = cfg.num_ues * cfg.num_rbgs;
    let snr = channel.snr.clone();
    let uniforms = (0..n).map(|_| rng.random::<f64>()).collect();
    let arrivals = (0..cfg.num_ues)
        .map(|_| draw_arrivals(cfg.arrival_rate, rng))
        .collect();
    channel_step(cfg, channel, rng);
    TtiDraws {
        snr,
        uniforms,
        arrivals,
    }
}

/// Everything that evolves during a run. Serializable for snapshots.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnvState {
    pub tti: u64,
    pub buffers: Vec<UeBuffer>,
    pub link: LinkAdaptState,
    /// PF average throughput per UE, bits/TTI.
    pub ema: Vec<f64>,
    pub window: WindowAccum,
    pub acks: Vec<u64>,
    pub nacks: Vec<u64>,
    exo_hash: u64,
    source: ExoSource,
}

#[derive(Clone, Debug)]
pub struct Env {
    cfg: Arc<SimConfig>,
    state: EnvState,
}

const SNAPSHOT_MAGIC: &[u8; 6] = b"SLSNAP";
const SNAPSHOT_VERSION: u16 = 1;

/// Serialized [`Env`] state.
///
/// Layout: magic `SLSNAP`, version `u16` LE, config fingerprint `u64` LE,
/// then the bincode (v1, little-endian, fixed-int) encoding of [`EnvState`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SnapshotBlob(pub Vec<u8>);

impl Env {
    pub fn new(cfg: SimConfig) -> Result<Self, SimError> {
        cfg.validate()?;
        Ok(Self::from_arc(Arc::new(cfg)))
    }

    /// Build from an already validated shared config.
    pub fn from_arc(cfg: Arc<SimConfig>) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);
        let mut channel = ChannelState::initial(&cfg, &mut rng);
        let pending = draw_tti(&cfg, &mut rng, &mut channel);
        let k = cfg.num_ues;
        let floor = cfg.ema_floor();
        let state = EnvState {
            tti: 0,
            buffers: (0..k).map(|_| UeBuffer::new(cfg.buffer_capacity)).collect(),
            link: LinkAdaptState::new(k),
            ema: vec![floor; k],
            window: WindowAccum::new(k),
            acks: vec![0; k],
            nacks: vec![0; k],
            exo_hash: 0xcbf2_9ce4_8422_2325,
            source: ExoSource::Live {
                rng,
                channel,
                pending,
            },
        };
        Self { cfg, state }
    }

    /// A copy of this environment whose future exogenous values come from
    /// `trace` instead of the random stream.
    pub fn with_trace(&self, trace: Arc<GenieTrace>) -> Result<Self, SimError> {
        if trace.config_fingerprint != self.cfg.fingerprint() {
            return Err(SimError::IncompatibleConfig);
        }
        if trace.start_tti != self.state.tti {
            return Err(SimError::TraceMismatch {
                expected: self.state.tti,
                found: trace.start_tti,
            });
        }
        let mut env = self.clone();
        env.state.source = ExoSource::Trace { trace, cursor: 0 };
        Ok(env)
    }

    pub fn cfg(&self) -> &SimConfig {
        &self.cfg
    }

    pub fn cfg_arc(&self) -> &Arc<SimConfig> {
        &self.cfg
    }

    pub fn state(&self) -> &EnvState {
        &self.state
    }

    pub fn tti(&self) -> u64 {
        self.state.tti
    }

    pub fn num_ues(&self) -> usize {
        self.cfg.num_ues
    }

    pub fn num_rbgs(&self) -> usize {
        self.cfg.num_rbgs
    }

    pub fn buffers(&self) -> &[UeBuffer] {
        &self.state.buffers
    }

    pub fn ema(&self) -> &[f64] {
        &self.state.ema
    }

    pub fn olla_offsets(&self) -> &[f64] {
        &self.state.link.olla_offset
    }

    pub fn window(&self) -> &WindowAccum {
        &self.state.window
    }

    pub fn window_kpis(&self) -> Kpis {
        self.state.window.kpis(self.cfg.tti_duration)
    }

    /// Start a fresh KPI window without touching the rest of the state.
    pub fn reset_window(&mut self) {
        self.state.window = WindowAccum::new(self.cfg.num_ues);
    }

    /// Running hash of every exogenous value consumed so far.
    pub fn exo_hash(&self) -> u64 {
        self.state.exo_hash
    }

    pub fn is_active(&self, ue: usize) -> bool {
        !self.state.buffers[ue].is_empty()
    }

    pub fn active_mask(&self) -> Vec<bool> {
        self.state.buffers.iter().map(|b| !b.is_empty()).collect()
    }

    /// True when a trace-driven environment has consumed its whole trace.
    pub fn is_exhausted(&self) -> bool {
        self.current_draws().is_none()
    }

    fn current_draws(&self) -> Option<&TtiDraws> {
        match &self.state.source {
            ExoSource::Live { pending, .. } => Some(pending),
            ExoSource::Trace { trace, cursor } => trace.rows.get(*cursor),
        }
    }

    /// SNR of `ue` on `rbg` in the current TTI.
    ///
    /// # Panics
    /// If a trace-driven environment is exhausted.
    pub fn snr(&self, ue: usize, rbg: usize) -> f64 {
        let draws = self.current_draws().expect("trace exhausted");
        draws.snr[ue * self.cfg.num_rbgs + rbg]
    }

    /// Link adaptation for `ue` on `rbg` with the current OLLA offset.
    pub fn link_choice(&self, ue: usize, rbg: usize) -> LinkChoice {
        self.state.link.choice(&self.cfg, ue, self.snr(ue, rbg))
    }

    /// Check that `decision` is well formed and only targets backlogged UEs.
    pub fn check_decision(&self, decision: &Decision) -> Result<(), SimError> {
        if decision.assignment.len() != self.cfg.num_rbgs {
            return Err(SimError::DecisionShape {
                expected: self.cfg.num_rbgs,
                found: decision.assignment.len(),
            });
        }
        for (rbg, ue) in decision.assignment.iter().enumerate() {
            if let Some(ue) = *ue {
                if ue >= self.cfg.num_ues {
                    return Err(SimError::UnknownUe { ue, rbg });
                }
                if self.state.buffers[ue].is_empty() {
                    return Err(SimError::EmptyBufferAssignment { ue, rbg });
                }
            }
        }
        Ok(())
    }

    /// Advance one TTI under `decision`.
    ///
    /// Order: transmissions RBG by RBG (with OLLA updates), expiry, admission
    /// of new arrivals, EMA update, then the channel moves on.
    pub fn step(&mut self, decision: &Decision) -> Result<KpiRecord, SimError> {
        self.check_decision(decision)?;
        let cfg = Arc::clone(&self.cfg);
        let k_ues = cfg.num_ues;
        let b_rbgs = cfg.num_rbgs;
        let now = self.state.tti;
        let mut rec = KpiRecord::empty(now, k_ues);

        {
            let EnvState {
                buffers,
                link,
                acks,
                nacks,
                exo_hash,
                source,
                ..
            } = &mut self.state;
            let draws = match &*source {
                ExoSource::Live { pending, .. } => pending,
                ExoSource::Trace { trace, cursor } => {
                    trace.rows.get(*cursor).ok_or(SimError::TraceExhausted)?
                }
            };
            for (rbg, ue) in decision.assignment.iter().enumerate() {
                let Some(ue) = *ue else { continue };
                if buffers[ue].is_empty() {
                    // Drained by an earlier RBG of this TTI.
                    continue;
                }
                let idx = ue * b_rbgs + rbg;
                let choice = link.choice(&cfg, ue, draws.snr[idx]);
                if choice.rate == 0 {
                    continue;
                }
                let ack = draws.uniforms[idx] >= choice.bler;
                if ack {
                    let d = buffers[ue].drain(choice.rate);
                    rec.served_bits[ue] += d.bits;
                    rec.sent_packets[ue] += d.packets_completed;
                    acks[ue] += 1;
                } else {
                    nacks[ue] += 1;
                }
                link.olla_update(ue, ack, &cfg);
            }
            for ue in 0..k_ues {
                let expired = buffers[ue].expire(now, cfg.max_delay) as u64;
                let (_, overflow) = buffers[ue].admit(draws.arrivals[ue], now, cfg.packet_size);
                rec.dropped_expired[ue] = expired;
                rec.dropped_overflow[ue] = overflow as u64;
                rec.dropped_packets[ue] = expired + overflow as u64;
                rec.arrived_packets[ue] = draws.arrivals[ue] as u64;
            }
            *exo_hash = draws.hash_into(*exo_hash);
        }

        let floor = cfg.ema_floor();
        for (t, &bits) in self.state.ema.iter_mut().zip(&rec.served_bits) {
            *t = ema_update(*t, bits as f64, cfg.ema_time_constant, floor);
        }
        self.state.window.add(&rec);
        self.state.tti += 1;
        match &mut self.state.source {
            ExoSource::Live {
                rng,
                channel,
                pending,
            } => *pending = draw_tti(&cfg, rng, channel),
            ExoSource::Trace { cursor, .. } => *cursor += 1,
        }
        Ok(rec)
    }

    /// Materialize the next `n` TTIs of exogenous randomness without
    /// advancing this environment.
    pub fn pregenerate_trace(&self, n: usize) -> Result<GenieTrace, SimError> {
        if n == 0 {
            return Err(SimError::EmptyTrace);
        }
        let mut rows = Vec::with_capacity(n);
        match &self.state.source {
            ExoSource::Live {
                rng,
                channel,
                pending,
            } => {
                let mut rng = rng.clone();
                let mut channel = channel.clone();
                rows.push(pending.clone());
                while rows.len() < n {
                    rows.push(draw_tti(&self.cfg, &mut rng, &mut channel));
                }
            }
            ExoSource::Trace { trace, cursor } => {
                let rest = trace.rows.get(*cursor..).unwrap_or(&[]);
                if rest.len() < n {
                    return Err(SimError::TraceExhausted);
                }
                rows.extend_from_slice(&rest[..n]);
            }
        }
        Ok(GenieTrace {
            config_fingerprint: self.cfg.fingerprint(),
            start_tti: self.state.tti,
            num_ues: self.cfg.num_ues,
            num_rbgs: self.cfg.num_rbgs,
            rows,
        })
    }

    /// Hash of the endogenous state: identical for two environments that
    /// will behave identically from here on under the same source.
    pub fn fingerprint(&self) -> u64 {
        let mut h = std::collections::hash_map::DefaultHasher::new();
        let st = &self.state;
        st.tti.hash(&mut h);
        st.buffers.hash(&mut h);
        for v in st.link.olla_offset.iter().chain(&st.ema) {
            v.to_bits().hash(&mut h);
        }
        st.window.hash(&mut h);
        st.acks.hash(&mut h);
        st.nacks.hash(&mut h);
        match &st.source {
            ExoSource::Live { .. } => 0u8.hash(&mut h),
            ExoSource::Trace { cursor, .. } => cursor.hash(&mut h),
        }
        h.finish()
    }

    pub fn snapshot(&self) -> SnapshotBlob {
        let mut out = Vec::with_capacity(256);
        out.extend_from_slice(SNAPSHOT_MAGIC);
        out.extend_from_slice(&SNAPSHOT_VERSION.to_le_bytes());
        out.extend_from_slice(&self.cfg.fingerprint().to_le_bytes());
        bincode::serialize_into(&mut out, &self.state).expect("EnvState serializes");
        SnapshotBlob(out)
    }

    pub fn restore(blob: &SnapshotBlob, cfg: Arc<SimConfig>) -> Result<Self, SimError> {
        let bytes = &blob.0;
        if bytes.len() < 16 || &bytes[..6] != SNAPSHOT_MAGIC {
            return Err(SimError::Corrupt("bad snapshot magic".into()));
        }
        let version = u16::from_le_bytes([bytes[6], bytes[7]]);
        if version != SNAPSHOT_VERSION {
            return Err(SimError::UnsupportedVersion(version as u32));
        }
        let fp = u64::from_le_bytes(bytes[8..16].try_into().unwrap());
        if fp != cfg.fingerprint() {
            return Err(SimError::IncompatibleConfig);
        }
        let state: EnvState =
            bincode::deserialize(&bytes[16..]).map_err(|e| SimError::Corrupt(e.to_string()))?;
        Ok(Self { cfg, state })
    }
}

impl PartialEq for Env {
    fn eq(&self, other: &Self) -> bool {
        self.cfg == other.cfg && self.state == other.state
    }
}

/// Stable hash of a byte slice (FNV-1a); exposed for artifact hashing.
pub fn stable_hash(bytes: &[u8]) -> u64 {
    fnv1a(bytes)
}
