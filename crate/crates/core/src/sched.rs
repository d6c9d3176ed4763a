//! Baseline schedulers: proportional fair, max C/I and round robin.
//!
//! Ties are broken towards the lowest UE index everywhere.

use crate::sim::{Decision, Env};

/// Exponential moving average of served bits, floored at `floor`.
pub fn ema_update(avg: f64, served_bits: f64, tau: f64, floor: f64) -> f64 {
    let a = 1.0 / tau;
    ((1.0 - a) * avg + a * served_bits).max(floor)
}

/// What a per-RBG baseline needs to see.
#[derive(Clone, Debug, PartialEq)]
pub struct SchedulerObservation {
    pub num_rbgs: usize,
    /// Row-major `num_ues x num_rbgs`: link-adapted bits per RBG.
    pub inst_rate: Vec<f64>,
    /// EMA throughput per UE, bits/TTI.
    pub avg_thp: Vec<f64>,
    pub active: Vec<bool>,
    pub spare_buffer: Vec<usize>,
    pub hol_wait: Vec<u64>,
}

impl SchedulerObservation {
    pub fn from_env(env: &Env) -> Self {
        let k = env.num_ues();
        let b = env.num_rbgs();
        let mut inst_rate = Vec::with_capacity(k * b);
        for ue in 0..k {
            for rbg in 0..b {
                inst_rate.push(env.link_choice(ue, rbg).rate as f64);
            }
        }
        let now = env.tti();
        Self {
            num_rbgs: b,
            inst_rate,
            avg_thp: env.ema().to_vec(),
            active: env.active_mask(),
            spare_buffer: env.buffers().iter().map(|q| q.spare()).collect(),
            hol_wait: env
                .buffers()
                .iter()
                .map(|q| q.head().map_or(0, |p| now - p.arrival_tti))
                .collect(),
        }
    }

    pub fn num_ues(&self) -> usize {
        self.avg_thp.len()
    }

    pub fn rate(&self, ue: usize, rbg: usize) -> f64 {
        self.inst_rate[ue * self.num_rbgs + rbg]
    }
}

fn argmax_active(active: &[bool], mut metric: impl FnMut(usize) -> f64) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (k, _) in active.iter().enumerate().filter(|(_, a)| **a) {
        let m = metric(k);
        if best.is_none_or(|(_, bm)| m > bm) {
            best = Some((k, m));
        }
    }
    best.map(|(k, _)| k)
}

/// `argmax_k I_{k,rbg} / T_k` over active UEs.
pub fn pf_select(obs: &SchedulerObservation, rbg: usize) -> Option<usize> {
    argmax_active(&obs.active, |k| obs.rate(k, rbg) / obs.avg_thp[k])
}

/// `argmax_k I_{k,rbg}` over active UEs.
pub fn maxci_select(obs: &SchedulerObservation, rbg: usize) -> Option<usize> {
    argmax_active(&obs.active, |k| obs.rate(k, rbg))
}

/// Next active UE strictly after `pointer` in cyclic order. The pointer
/// moves to the selection; it stays put when nobody is active.
pub fn rr_select(pointer: &mut usize, active: &[bool]) -> Option<usize> {
    let k = active.len();
    let next = (1..=k).map(|i| (*pointer + i) % k).find(|&ue| active[ue])?;
    *pointer = next;
    Some(next)
}

/// A per-TTI scheduling policy.
pub trait Scheduler {
    fn name(&self) -> &str;
    fn decide(&mut self, env: &Env) -> Decision;
}

#[derive(Clone, Debug, Default)]
pub struct ProportionalFair;

impl Scheduler for ProportionalFair {
    fn name(&self) -> &str {
        "pf"
    }

    fn decide(&mut self, env: &Env) -> Decision {
        let obs = SchedulerObservation::from_env(env);
        Decision {
            assignment: (0..obs.num_rbgs).map(|b| pf_select(&obs, b)).collect(),
        }
    }
}

#[derive(Clone, Debug, Default)]
pub struct MaxCi;

impl Scheduler for MaxCi {
    fn name(&self) -> &str {
        "maxci"
    }

    fn decide(&mut self, env: &Env) -> Decision {
        let obs = SchedulerObservation::from_env(env);
        Decision {
            assignment: (0..obs.num_rbgs).map(|b| maxci_select(&obs, b)).collect(),
        }
    }
}

#[derive(Clone, Debug)]
pub struct RoundRobin {
    pointer: usize,
}

impl RoundRobin {
    /// Starts so that UE 0 is served first.
    pub fn new(num_ues: usize) -> Self {
        Self {
            pointer: num_ues.saturating_sub(1),
        }
    }
}

impl Scheduler for RoundRobin {
    fn name(&self) -> &str {
        "rr"
    }

    fn decide(&mut self, env: &Env) -> Decision {
        let active = env.active_mask();
        Decision {
            assignment: (0..env.num_rbgs())
                .map(|_| rr_select(&mut self.pointer, &active))
                .collect(),
        }
    }
}

/// Replays a fixed per-TTI action sequence. Actions that target an empty
/// buffer (or run past the end) become idle.
#[derive(Clone, Debug)]
pub struct Replay {
    decisions: Vec<Decision>,
    cursor: usize,
}

impl Replay {
    pub fn new(decisions: Vec<Decision>) -> Self {
        Self {
            decisions,
            cursor: 0,
        }
    }
}

impl Scheduler for Replay {
    fn name(&self) -> &str {
        "replay"
    }

    fn decide(&mut self, env: &Env) -> Decision {
        let d = self.decisions.get(self.cursor);
        self.cursor += 1;
        match d {
            Some(d) => sanitize(env, d),
            None => Decision::idle(env.num_rbgs()),
        }
    }
}

/// Replace assignments to empty-buffer (or unknown) UEs by idle.
pub fn sanitize(env: &Env, d: &Decision) -> Decision {
    Decision {
        assignment: d
            .assignment
            .iter()
            .map(|ue| ue.filter(|&k| k < env.num_ues() && env.is_active(k)))
            .collect(),
    }
}

/// Baseline scheduler by config name.
pub fn by_name(name: &str, num_ues: usize) -> Option<Box<dyn Scheduler + Send>> {
    match name {
        "pf" => Some(Box::new(ProportionalFair)),
        "maxci" => Some(Box::new(MaxCi)),
        "rr" => Some(Box::new(RoundRobin::new(num_ues))),
        _ => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn obs(rates: &[f64], avg: &[f64], active: &[bool]) -> SchedulerObservation {
        SchedulerObservation {
            num_rbgs: 1,
            inst_rate: rates.to_vec(),
            avg_thp: avg.to_vec(),
            active: active.to_vec(),
            spare_buffer: vec![0; rates.len()],
            hol_wait: vec![0; rates.len()],
        }
    }

    #[test]
    fn pf_picks_highest_ratio() {
        // Ratios 2 vs 10: the second UE (index 1).
        assert_eq!(pf_select(&obs(&[10.0, 10.0], &[5.0, 1.0], &[true, true]), 0), Some(1));
    }

    #[test]
    fn pf_none_when_inactive() {
        assert_eq!(pf_select(&obs(&[10.0, 10.0], &[5.0, 1.0], &[false, false]), 0), None);
        assert_eq!(pf_select(&obs(&[10.0, 99.0], &[5.0, 1.0], &[true, false]), 0), Some(0));
    }

    #[test]
    fn pf_scale_invariant() {
        let o = obs(&[3.0, 7.0, 5.0], &[1.0, 4.0, 2.0], &[true, true, true]);
        let mut scaled = o.clone();
        for r in &mut scaled.inst_rate {
            *r *= 17.5;
        }
        assert_eq!(pf_select(&o, 0), pf_select(&scaled, 0));
    }

    #[test]
    fn ema_examples() {
        assert_eq!(ema_update(4.0, 8.0, 2.0, 1e-3), 6.0);
        let mut t = 100.0;
        for _ in 0..10_000 {
            t = ema_update(t, 0.0, 10.0, 0.5);
        }
        assert_eq!(t, 0.5);
        let mut t = 0.5;
        for _ in 0..10_000 {
            t = ema_update(t, 42.0, 10.0, 0.5);
        }
        assert!((t - 42.0).abs() < 1e-9);
    }

    #[test]
    fn maxci_examples() {
        assert_eq!(maxci_select(&obs(&[3.0, 7.0], &[1.0, 1.0], &[true, true]), 0), Some(1));
        assert_eq!(maxci_select(&obs(&[3.0, 7.0], &[1.0, 1.0], &[true, false]), 0), Some(0));
        assert_eq!(maxci_select(&obs(&[5.0, 5.0], &[1.0, 1.0], &[true, true]), 0), Some(0));
    }

    #[test]
    fn rr_examples() {
        let mut p = 2;
        let seq: Vec<_> = (0..4).map(|_| rr_select(&mut p, &[true; 3]).unwrap()).collect();
        assert_eq!(seq, vec![0, 1, 2, 0]);

        let mut p = 2;
        let seq: Vec<_> = (0..4)
            .map(|_| rr_select(&mut p, &[true, false, true]).unwrap())
            .collect();
        assert_eq!(seq, vec![0, 2, 0, 2]);

        let mut p = 1;
        assert_eq!(rr_select(&mut p, &[false; 3]), None);
        assert_eq!(p, 1);
    }
}
