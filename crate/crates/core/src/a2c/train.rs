//! Synchronous actor-critic training over parallel cells.

use std::sync::Arc;

use ndarray::ArrayView2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::agent::{check_policy, decide_multi_rbg};
use super::eval::{evaluate, eval_seeds};
use super::learn::{a2c_update, rollout_targets, Experience, LossWeights, UpdateBatch};
use super::obs::{obs_width, observe, step_reward};
use super::{A2cConfig, A2cError};
use crate::nn::{LrSchedule, Mlp};
use crate::scenario::Scenario;
use crate::sched::{ProportionalFair, Scheduler};
use crate::seeds::derive_seed;
use crate::sim::Env;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct IterationLog {
    pub iteration: u64,
    /// Mean per-TTI reward of the batch.
    pub mean_reward: f64,
    /// Mean per-TTI reward PF earned from the same states and draws.
    pub pf_reward: f64,
    pub loss: f64,
    pub entropy: f64,
    pub value_loss: f64,
    pub lr: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PeriodicEval {
    pub iteration: u64,
    pub drl_score: f64,
    pub pf_score: f64,
    pub drl_reward: f64,
    pub pf_reward: f64,
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub policy: Mlp,
    pub value: Mlp,
    pub log: Vec<IterationLog>,
    pub evals: Vec<PeriodicEval>,
}

/// Output layers start at this fraction of their He-uniform draw.
pub const OUTPUT_INIT_SCALE: f64 = 0.01;

/// Fresh policy and value networks for `num_ues` UEs.
pub fn init_networks(cfg: &A2cConfig, num_ues: usize) -> (Mlp, Mlp) {
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.rng_seed, 0, "init"));
    let w = obs_width(num_ues);
    let dims = |out: usize| {
        let mut d = vec![w];
        d.extend(&cfg.hidden);
        d.push(out);
        d
    };
    let mut policy = Mlp::he_uniform(&dims(num_ues), &mut rng);
    let mut value = Mlp::he_uniform(&dims(1), &mut rng);
    // Near-uniform initial policy and near-zero initial values.
    for net in [&mut policy, &mut value] {
        let head = net.layers.last_mut().expect("at least one layer");
        head.weight *= OUTPUT_INIT_SCALE;
    }
    (policy, value)
}

/// One training cell and its PF twin, which starts every episode from the
/// same state and therefore sees the same draws.
struct Worker {
    index: u64,
    episode: u64,
    env: Env,
    twin: Env,
    steps: u32,
}

impl Worker {
    fn start(index: u64, episode: u64, cfg: &A2cConfig, scenario: &Scenario, num_envs: u64) -> Result<Self, A2cError> {
        let seed = derive_seed(cfg.rng_seed, episode * num_envs + index, "train");
        let env = scenario.instantiate(seed)?;
        Ok(Self {
            index,
            episode,
            twin: env.clone(),
            env,
            steps: 0,
        })
    }
}

pub fn train(cfg: &A2cConfig, scenario: &Scenario) -> Result<TrainOutcome, A2cError> {
    let (policy, value) = init_networks(cfg, scenario.base.num_ues);
    train_from(cfg, scenario, policy, value)
}

/// Continue training from given networks.
pub fn train_from(
    cfg: &A2cConfig,
    scenario: &Scenario,
    mut policy: Mlp,
    mut value: Mlp,
) -> Result<TrainOutcome, A2cError> {
    cfg.validate(scenario)?;
    let k = scenario.base.num_ues;
    check_policy(&policy, k)?;
    let weights = LossWeights {
        entropy: cfg.entropy_coef,
        value: cfg.value_coef,
    };
    let schedule = LrSchedule {
        initial: cfg.lr,
        decay_at: Some(cfg.lr_decay_at.unwrap_or(cfg.iterations / 2)),
        factor: cfg.lr_decay_factor,
    };
    let n_envs = cfg.num_envs as u64;
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.rng_seed, 0, "sampling"));
    let mut workers = (0..n_envs)
        .map(|i| Worker::start(i, 0, cfg, scenario, n_envs))
        .collect::<Result<Vec<_>, _>>()?;
    let monitor_seeds: Vec<u64> = eval_seeds(derive_seed(cfg.rng_seed, 0, "monitor"), cfg.eval_seeds);
    let mut log = Vec::with_capacity(cfg.iterations as usize);
    let mut evals = Vec::new();
    let mut pf = ProportionalFair;

    for iteration in 0..cfg.iterations {
        let mut experiences = Vec::with_capacity(cfg.num_envs * cfg.n_steps);
        let mut targets = Vec::with_capacity(cfg.num_envs * cfg.n_steps);
        let mut reward_sum = 0.0;
        let mut pf_sum = 0.0;
        for w in &mut workers {
            let mut rollout = Vec::with_capacity(cfg.n_steps);
            for _ in 0..cfg.n_steps {
                let (state, _) = observe(&w.env);
                let (decision, choices) = decide_multi_rbg(&policy, &w.env, Some(&mut rng));
                let rec = w.env.step(&decision)?;
                let r = step_reward(&w.env, &rec, &cfg.reward);
                let pd = pf.decide(&w.twin);
                let prec = w.twin.step(&pd)?;
                pf_sum += step_reward(&w.twin, &prec, &cfg.reward);
                reward_sum += r;
                w.steps += 1;
                rollout.push(Experience {
                    state,
                    choices,
                    reward: r,
                    next_state: observe(&w.env).0,
                    done: w.steps >= scenario.window,
                });
                if w.steps >= scenario.window {
                    // Truncated episode: bootstrap from the last state.
                    break;
                }
            }
            let last = rollout.last().expect("n_steps >= 1");
            let row = ArrayView2::from_shape((1, last.next_state.len()), &last.next_state)
                .expect("one row");
            let bootstrap = value.predict(row)?[[0, 0]];
            let rewards: Vec<f64> = rollout.iter().map(|e| e.reward).collect();
            targets.extend(rollout_targets(&rewards, bootstrap, cfg.gamma));
            experiences.extend(rollout);
        }
        let lr = schedule.at(iteration);
        let batch = UpdateBatch {
            experiences,
            targets,
        };
        let obj = a2c_update(&mut policy, &mut value, &batch, weights, lr).map_err(|e| match e {
            A2cError::NonFiniteLoss { dump, .. } => A2cError::NonFiniteLoss { iteration, dump },
            other => other,
        })?;
        let m = batch.experiences.len() as f64;
        log.push(IterationLog {
            iteration,
            mean_reward: reward_sum / m,
            pf_reward: pf_sum / m,
            loss: obj.loss,
            entropy: obj.entropy,
            value_loss: obj.value_loss,
            lr,
        });

        for w in &mut workers {
            if w.steps >= scenario.window {
                *w = Worker::start(w.index, w.episode + 1, cfg, scenario, n_envs)?;
            }
        }

        let done = iteration + 1;
        if cfg.eval_every > 0 && cfg.eval_seeds > 0 && done % cfg.eval_every == 0 {
            let p = Arc::new(policy.clone());
            let r = evaluate(&p, scenario, &monitor_seeds, &cfg.reward)?;
            evals.push(PeriodicEval {
                iteration: done,
                drl_score: r.mean_candidate_score,
                pf_score: r.mean_pf_score,
                drl_reward: r.mean_candidate_reward,
                pf_reward: r.mean_pf_reward,
            });
        }
    }
    Ok(TrainOutcome {
        policy,
        value,
        log,
        evals,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::SimConfig;

    fn tiny() -> (A2cConfig, Scenario) {
        let mut sc = Scenario::new(SimConfig::desk_scale(3, 1));
        sc.warmup = 10;
        sc.window = 16;
        let cfg = A2cConfig {
            num_envs: 2,
            n_steps: 4,
            iterations: 12,
            hidden: vec![8],
            eval_every: 5,
            eval_seeds: 1,
            ..A2cConfig::default()
        };
        (cfg, sc)
    }

    #[test]
    fn zero_iterations_returns_initial() {
        let (mut cfg, sc) = tiny();
        cfg.iterations = 0;
        let out = train(&cfg, &sc).unwrap();
        let (p, v) = init_networks(&cfg, 3);
        assert_eq!(out.policy, p);
        assert_eq!(out.value, v);
        assert!(out.log.is_empty());
    }

    #[test]
    fn log_has_one_row_per_iteration_and_repeats() {
        let (cfg, sc) = tiny();
        let a = train(&cfg, &sc).unwrap();
        assert_eq!(a.log.len(), 12);
        assert_eq!(a.evals.len(), 2);
        let b = train(&cfg, &sc).unwrap();
        assert_eq!(a.log, b.log);
        assert_eq!(a.policy, b.policy);
    }
}
