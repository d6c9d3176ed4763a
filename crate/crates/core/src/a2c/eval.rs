//! Same-state comparison of a scheduler against PF.

use std::sync::Arc;

use serde::Serialize;

use super::agent::DrlScheduler;
use super::obs::step_reward;
use super::A2cError;
use crate::nn::Mlp;
use crate::scenario::Scenario;
use crate::sched::{ProportionalFair, Scheduler};
use crate::score::{max_throughput, Preference};
use crate::seeds::derive_seed;
use crate::sim::{Env, Kpis};

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct LegResult {
    pub kpis: Kpis,
    /// Preference score with THP normalized by the top-MCS cell throughput.
    pub score: f64,
    /// Mean per-TTI reward over the window.
    pub mean_reward: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SeedComparison {
    pub seed: u64,
    pub candidate: LegResult,
    pub pf: LegResult,
    /// Candidate over PF. For PDR a ratio below 1 is an improvement.
    pub thp_gain: f64,
    pub jfi_gain: f64,
    pub pdr_gain: f64,
    /// Hash of the exogenous values both legs consumed.
    pub exo_hash: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EvalReport {
    pub per_seed: Vec<SeedComparison>,
    pub mean_thp_gain: f64,
    pub mean_jfi_gain: f64,
    pub mean_pdr_gain: f64,
    pub mean_candidate_score: f64,
    pub mean_pf_score: f64,
    pub mean_candidate_reward: f64,
    pub mean_pf_reward: f64,
}

fn ratio(a: f64, b: f64) -> f64 {
    if a == b {
        1.0
    } else {
        a / b
    }
}

/// Roll `window` TTIs of `env` under `scheduler`.
pub fn run_leg(
    env: &mut Env,
    scheduler: &mut dyn Scheduler,
    window: u32,
    pref: &Preference,
) -> Result<LegResult, A2cError> {
    env.reset_window();
    let mut reward_sum = 0.0;
    for _ in 0..window {
        let d = scheduler.decide(env);
        let rec = env.step(&d)?;
        reward_sum += step_reward(env, &rec, pref);
    }
    let kpis = env.window_kpis();
    Ok(LegResult {
        kpis,
        score: pref.score(&kpis, max_throughput(env.cfg())),
        mean_reward: reward_sum / window.max(1) as f64,
    })
}

/// Snapshot `env`, run the candidate, restore, run PF. Both legs see the
/// same exogenous values; a hash mismatch is an error.
pub fn compare_from_snapshot(
    env: &Env,
    candidate: &mut dyn Scheduler,
    window: u32,
    pref: &Preference,
    seed: u64,
) -> Result<SeedComparison, A2cError> {
    let snap = env.snapshot();
    let cfg = Arc::clone(env.cfg_arc());
    let mut a = Env::restore(&snap, Arc::clone(&cfg))?;
    let cand = run_leg(&mut a, candidate, window, pref)?;
    let mut b = Env::restore(&snap, cfg)?;
    let pf = run_leg(&mut b, &mut ProportionalFair, window, pref)?;
    if a.exo_hash() != b.exo_hash() {
        return Err(A2cError::UnfairComparison);
    }
    Ok(SeedComparison {
        seed,
        thp_gain: ratio(cand.kpis.thp, pf.kpis.thp),
        jfi_gain: ratio(cand.kpis.jfi, pf.kpis.jfi),
        pdr_gain: ratio(cand.kpis.pdr, pf.kpis.pdr),
        candidate: cand,
        pf,
        exo_hash: a.exo_hash(),
    })
}

/// Evaluation seeds derived from a master seed.
pub fn eval_seeds(master: u64, count: u32) -> Vec<u64> {
    (0..count as u64).map(|i| derive_seed(master, i, "eval")).collect()
}

/// Compare schedulers built by `make` against PF on each deployment seed.
pub fn evaluate_with(
    scenario: &Scenario,
    seeds: &[u64],
    pref: &Preference,
    mut make: impl FnMut() -> Result<Box<dyn Scheduler>, A2cError>,
) -> Result<EvalReport, A2cError> {
    let mut per_seed = Vec::with_capacity(seeds.len());
    for &seed in seeds {
        let env = scenario.instantiate(seed)?;
        let mut s = make()?;
        per_seed.push(compare_from_snapshot(&env, s.as_mut(), scenario.window, pref, seed)?);
    }
    Ok(summarize(per_seed))
}

/// Means over per-seed comparisons.
pub fn summarize(per_seed: Vec<SeedComparison>) -> EvalReport {
    let n = per_seed.len().max(1) as f64;
    let mean = |f: &dyn Fn(&SeedComparison) -> f64| per_seed.iter().map(f).sum::<f64>() / n;
    EvalReport {
        mean_thp_gain: mean(&|c| c.thp_gain),
        mean_jfi_gain: mean(&|c| c.jfi_gain),
        mean_pdr_gain: mean(&|c| c.pdr_gain),
        mean_candidate_score: mean(&|c| c.candidate.score),
        mean_pf_score: mean(&|c| c.pf.score),
        mean_candidate_reward: mean(&|c| c.candidate.mean_reward),
        mean_pf_reward: mean(&|c| c.pf.mean_reward),
        per_seed,
    }
}

/// Greedy policy against PF. The policy may come from a cell with a
/// different number of RBGs; only the UE count must match.
pub fn evaluate(
    policy: &Arc<Mlp>,
    scenario: &Scenario,
    seeds: &[u64],
    pref: &Preference,
) -> Result<EvalReport, A2cError> {
    let k = scenario.base.num_ues;
    evaluate_with(scenario, seeds, pref, || {
        Ok(Box::new(DrlScheduler::greedy(Arc::clone(policy), k)?))
    })
}
