//! Per-UE features and the per-TTI reward.

use crate::score::Preference;
use crate::sim::{Env, KpiRecord};

/// Features per UE: instantaneous rate, average rate, spare buffer, HoL wait.
pub const FEATURES_PER_UE: usize = 4;

pub fn obs_width(num_ues: usize) -> usize {
    FEATURES_PER_UE * num_ues
}

/// Observation for deciding `rbg`, with each UE's queue reduced by
/// `reserved_bits` (expected service of RBGs already assigned this TTI).
///
/// Rates are normalized by the top-MCS RBG rate (the average rate by that
/// times the number of RBGs), buffer and wait by capacity and `max_delay`.
/// A UE is selectable iff its reduced queue is positive.
pub fn build_obs(env: &Env, rbg: usize, reserved_bits: &[f64]) -> (Vec<f64>, Vec<bool>) {
    let cfg = env.cfg();
    let k = env.num_ues();
    let max_rate = cfg.max_rbg_rate() as f64;
    let full_buffer = (cfg.buffer_capacity as u64 * cfg.packet_size as u64) as f64;
    let now = env.tti();
    let mut obs = Vec::with_capacity(obs_width(k));
    let mut mask = Vec::with_capacity(k);
    for ue in 0..k {
        let buf = &env.buffers()[ue];
        let queued = (buf.queued_bits() as f64 - reserved_bits[ue]).max(0.0);
        let inst = env.link_choice(ue, rbg).rate as f64 / max_rate;
        let avg = env.ema()[ue] / (max_rate * cfg.num_rbgs as f64);
        let spare = 1.0 - queued / full_buffer;
        let wait = buf.head().map_or(0, |p| now - p.arrival_tti) as f64 / cfg.max_delay as f64;
        obs.extend([
            inst.clamp(0.0, 1.0),
            avg.clamp(0.0, 1.0),
            spare.clamp(0.0, 1.0),
            wait.clamp(0.0, 1.0),
        ]);
        mask.push(queued > 0.0);
    }
    (obs, mask)
}

/// Observation of the TTI as a whole (first RBG, nothing reserved).
pub fn observe(env: &Env) -> (Vec<f64>, Vec<bool>) {
    build_obs(env, 0, &vec![0.0; env.num_ues()])
}

/// `alpha * served / max_service + beta * window_jfi - delta * drops / K`.
pub fn reward(rec: &KpiRecord, window_jfi: f64, max_tti_service: f64, pref: &Preference) -> f64 {
    let served = rec.total_served_bits() as f64 / max_tti_service;
    let drops = rec.total_dropped() as f64 / rec.served_bits.len() as f64;
    pref.alpha * served + pref.beta * window_jfi - pref.delta * drops
}

/// Reward of the TTI `env` just completed with record `rec`.
pub fn step_reward(env: &Env, rec: &KpiRecord, pref: &Preference) -> f64 {
    reward(rec, env.window().jfi(), env.cfg().max_tti_service() as f64, pref)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sched::{ProportionalFair, Scheduler};
    use crate::sim::{Decision, SimConfig};

    #[test]
    fn empty_buffers() {
        let mut cfg = SimConfig::desk_scale(3, 1);
        cfg.arrival_rate = 0.0;
        let env = Env::new(cfg).unwrap();
        let (obs, mask) = observe(&env);
        assert_eq!(obs.len(), 12);
        assert!(mask.iter().all(|m| !m));
        for ue in 0..3 {
            assert_eq!(obs[ue * 4 + 2], 1.0);
            assert_eq!(obs[ue * 4 + 3], 0.0);
        }
    }

    #[test]
    fn wait_reaches_one_at_max_delay() {
        let mut cfg = SimConfig::desk_scale(2, 1);
        cfg.max_delay = 5;
        cfg.arrival_rate = 20.0;
        let mut env = Env::new(cfg).unwrap();
        for _ in 0..5 {
            env.step(&Decision::idle(1)).unwrap();
        }
        assert_eq!(env.buffers()[0].head().unwrap().arrival_tti, 0);
        let (obs, mask) = observe(&env);
        assert!(obs.iter().all(|v| (0.0..=1.0).contains(v)));
        assert_eq!(obs[3], 1.0);
        assert_eq!(mask, vec![true, true]);
        assert_eq!(observe(&env.clone()), (obs, mask));
    }

    #[test]
    fn reward_examples() {
        let pref = Preference { alpha: 0.0, beta: 0.0, delta: 1.0 };
        let mut rec = KpiRecord::empty(0, 5);
        rec.dropped_packets = vec![1, 0, 2, 0, 0];
        assert!((reward(&rec, 0.7, 1000.0, &pref) + 0.6).abs() < 1e-15);
        let idle = KpiRecord::empty(0, 5);
        let p = Preference::default();
        assert_eq!(reward(&idle, 0.7, 1000.0, &p), 0.7);
    }

    #[test]
    fn reward_is_linear_in_weights() {
        let mut env = Env::new(SimConfig::desk_scale(4, 1)).unwrap();
        let mut pf = ProportionalFair;
        let p = Preference { alpha: 0.7, beta: 0.4, delta: 1.3 };
        let p3 = Preference { alpha: 2.1, beta: 1.2, delta: 3.9 };
        for _ in 0..200 {
            let d = pf.decide(&env);
            let rec = env.step(&d).unwrap();
            let r = step_reward(&env, &rec, &p);
            let r3 = step_reward(&env, &rec, &p3);
            assert!((r3 - 3.0 * r).abs() < 1e-12);
        }
    }
}
