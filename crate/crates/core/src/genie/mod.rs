//! Genie-aided searches: candidates are scored by replaying them on a
//! frozen future (arrivals, fading and decoding outcomes).

mod exhaustive;
mod ga;
mod pareto;
mod pla;

pub use exhaustive::{enumerate, exhaustive_search, ActionSpace, Outcome, MAX_EXHAUSTIVE};
pub use ga::{
    decode, encode_decisions, evaluate_genome, nsga2_run, polynomial_mutation, sbx_crossover,
    GaConfig, GaMember, GaOutcome, Genome,
};
pub use pareto::{
    crowding_distance, crowding_truncate, dominates, fast_nondominated_sort, hypervolume,
    nondominated,
};
pub use pla::{dedupe, expand, pla_run, prune, PlaConfig, PlaOutcome, SearchPath};

use std::sync::Arc;

use thiserror::Error;

use crate::sched::{sanitize, Scheduler};
use crate::score::Preference;
use crate::sim::{Decision, Env, GenieTrace, Kpis, SimError};

#[derive(Debug, Error)]
pub enum GenieError {
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error("search space of {size} sequences exceeds the limit of {limit}")]
    SearchTooLarge { size: f64, limit: u64 },
    #[error("{0} supports a single RBG only")]
    MultiRbg(&'static str),
    #[error("invalid search config: {0}")]
    InvalidConfig(String),
}

/// Hypervolume reference: zero THP, zero JFI, every packet dropped.
pub const HV_REFERENCE: Kpis = Kpis {
    thp: 0.0,
    jfi: 0.0,
    pdr: 1.0,
};

/// A start state plus its frozen future of `horizon` TTIs.
#[derive(Clone, Debug)]
pub struct GenieProblem {
    start: Env,
    horizon: usize,
}

impl GenieProblem {
    /// Freeze the next `horizon` TTIs of `env`.
    pub fn from_env(env: &Env, horizon: usize) -> Result<Self, GenieError> {
        let trace = env.pregenerate_trace(horizon)?;
        Self::with_trace(env, Arc::new(trace))
    }

    pub fn with_trace(env: &Env, trace: Arc<GenieTrace>) -> Result<Self, GenieError> {
        let horizon = trace.len();
        let mut start = env.with_trace(trace)?;
        start.reset_window();
        Ok(Self { start, horizon })
    }

    /// Trace-driven environment at the start of the window, window reset.
    pub fn start(&self) -> &Env {
        &self.start
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn num_ues(&self) -> usize {
        self.start.num_ues()
    }

    pub fn num_rbgs(&self) -> usize {
        self.start.num_rbgs()
    }

    /// Genes per candidate: one per (TTI, RBG).
    pub fn genome_len(&self) -> usize {
        self.horizon * self.num_rbgs()
    }

    /// Replay `decisions` over the window. Assignments to empty buffers
    /// become idle; missing TTIs are idle.
    pub fn replay(&self, decisions: &[Decision]) -> Kpis {
        let mut env = self.start.clone();
        let idle = Decision::idle(self.num_rbgs());
        for t in 0..self.horizon {
            let d = sanitize(&env, decisions.get(t).unwrap_or(&idle));
            env.step(&d).expect("sanitized decisions on an unexhausted trace");
        }
        env.window_kpis()
    }

    /// Run `scheduler` over the window; returns its decisions and KPIs.
    pub fn replay_scheduler(&self, scheduler: &mut dyn Scheduler) -> (Vec<Decision>, Kpis) {
        let mut env = self.start.clone();
        let mut decisions = Vec::with_capacity(self.horizon);
        for _ in 0..self.horizon {
            let d = sanitize(&env, &scheduler.decide(&env));
            env.step(&d).expect("sanitized decisions on an unexhausted trace");
            decisions.push(d);
        }
        (decisions, env.window_kpis())
    }
}

/// Index of the front member maximizing the preference, THP normalized by
/// the front's best. First index wins ties.
pub fn select_final(front: &[Kpis], pref: &Preference) -> Option<usize> {
    let thp_ref = front.iter().map(|k| k.thp).fold(0.0, f64::max);
    let mut best: Option<(usize, f64)> = None;
    for (i, k) in front.iter().enumerate() {
        let s = pref.score(k, thp_ref);
        if best.is_none_or(|(_, b)| s > b) {
            best = Some((i, s));
        }
    }
    best.map(|(i, _)| i)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn k(thp: f64, jfi: f64, pdr: f64) -> Kpis {
        Kpis { thp, jfi, pdr }
    }

    #[test]
    fn select_final_examples() {
        let front = [k(5.0, 0.9, 0.3), k(10.0, 0.5, 0.4), k(2.0, 0.95, 0.1)];
        assert_eq!(select_final(&front[..1], &Preference::default()), Some(0));
        let thp_only = Preference { alpha: 1.0, beta: 0.0, delta: 0.0 };
        assert_eq!(select_final(&front, &thp_only), Some(1));
        let pdr_only = Preference { alpha: 0.0, beta: 0.0, delta: 1.0 };
        assert_eq!(select_final(&front, &pdr_only), Some(2));
        assert_eq!(select_final(&[], &pdr_only), None);
    }
}
