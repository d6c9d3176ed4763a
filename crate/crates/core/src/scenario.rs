//! UE deployments, warm-up and KPI windows shared by training, evaluation
//! and the genie searches.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::sched::{ProportionalFair, Scheduler};
use crate::seeds::derive_seed;
use crate::sim::{Env, Kpis, SimConfig, SimError};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub base: SimConfig,
    /// When set, each deployment draws its per-UE mean SNRs uniformly from
    /// this range, dB. Otherwise the base config's SNRs are kept.
    pub snr_range_db: Option<(f64, f64)>,
    /// TTIs of PF operation before the KPI window opens.
    pub warmup: u32,
    pub window: u32,
}

impl Scenario {
    pub fn new(base: SimConfig) -> Self {
        Self {
            base,
            snr_range_db: Some((0.0, 20.0)),
            warmup: 100,
            window: 500,
        }
    }

    /// The cell config of deployment `seed`.
    pub fn deployment(&self, seed: u64) -> SimConfig {
        let mut cfg = self.base.clone();
        if let Some((lo, hi)) = self.snr_range_db {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, 0, "deployment"));
            for s in &mut cfg.mean_snr_per_ue {
                *s = if hi > lo { rng.random_range(lo..hi) } else { lo };
            }
        }
        cfg.rng_seed = derive_seed(seed, 0, "exogenous");
        cfg
    }

    /// Deployment `seed`, warmed up under PF, with a fresh KPI window.
    pub fn instantiate(&self, seed: u64) -> Result<Env, SimError> {
        let mut env = Env::new(self.deployment(seed))?;
        warm_up(&mut env, self.warmup);
        Ok(env)
    }
}

pub fn warm_up(env: &mut Env, ttis: u32) {
    let mut pf = ProportionalFair;
    for _ in 0..ttis {
        let d = pf.decide(env);
        env.step(&d).expect("PF decisions are always valid");
    }
    env.reset_window();
}

/// Run `ttis` steps under `scheduler` and return the window KPIs.
pub fn run_kpis(env: &mut Env, scheduler: &mut dyn Scheduler, ttis: u32) -> Result<Kpis, SimError> {
    env.reset_window();
    for _ in 0..ttis {
        let d = scheduler.decide(env);
        env.step(&d)?;
    }
    Ok(env.window_kpis())
}

/// Mean bits per TTI PF delivers on `cfg` with saturated buffers.
pub fn pf_capacity(cfg: &SimConfig, probe_ttis: u32) -> f64 {
    let mut sat = cfg.clone();
    sat.buffer_capacity = 1000;
    sat.max_delay = u32::MAX;
    sat.arrival_rate = 4.0 * cfg.num_rbgs as f64 * cfg.max_rbg_rate() as f64
        / cfg.packet_size as f64
        / cfg.num_ues as f64
        + 1.0;
    let mut env = Env::new(sat).expect("saturated config stays valid");
    warm_up(&mut env, 200);
    let mut pf = ProportionalFair;
    let mut bits = 0u64;
    for _ in 0..probe_ttis {
        let d = pf.decide(&env);
        bits += env.step(&d).expect("valid").total_served_bits();
    }
    bits as f64 / probe_ttis as f64
}

/// Per-UE arrival rate that offers `load` times the saturated PF capacity.
pub fn calibrate_arrival_rate(cfg: &SimConfig, load: f64, probe_ttis: u32) -> f64 {
    load * pf_capacity(cfg, probe_ttis) / (cfg.num_ues as f64 * cfg.packet_size as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_load_is_moderately_overloaded() {
        let cfg = SimConfig::desk_scale(5, 1);
        let offered = cfg.arrival_rate * cfg.num_ues as f64 * cfg.packet_size as f64;
        let load = offered / pf_capacity(&cfg, 20_000);
        assert!((1.1..1.3).contains(&load), "load {load}");
    }

    #[test]
    fn deployments_differ_by_seed_only() {
        let sc = Scenario::new(SimConfig::desk_scale(5, 1));
        assert_eq!(sc.deployment(3), sc.deployment(3));
        assert_ne!(sc.deployment(3).mean_snr_per_ue, sc.deployment(4).mean_snr_per_ue);
        assert!(sc
            .deployment(3)
            .mean_snr_per_ue
            .iter()
            .all(|s| (0.0..20.0).contains(s)));
    }

    #[test]
    fn warm_up_leaves_fresh_window() {
        let sc = Scenario::new(SimConfig::desk_scale(5, 1));
        let env = sc.instantiate(1).unwrap();
        assert_eq!(env.tti(), 100);
        assert_eq!(env.window().ttis, 0);
    }
}
