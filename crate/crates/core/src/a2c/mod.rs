//! Actor-critic scheduler: observations, reward, masked policy reused per
//! RBG, n-step advantages, synchronous training and same-state evaluation
//! against PF.

mod agent;
mod eval;
mod learn;
mod obs;
mod train;

pub use agent::{check_policy, decide_multi_rbg, DrlScheduler, RbgChoice};
pub use eval::{
    compare_from_snapshot, eval_seeds, evaluate, evaluate_with, run_leg, summarize, EvalReport,
    LegResult, SeedComparison,
};
pub use learn::{
    a2c_loss, a2c_objective, a2c_update, advantage, nstep_target, rollout_targets, state_values,
    Experience, LossWeights, Objective, UpdateBatch,
};
pub use obs::{build_obs, obs_width, observe, reward, step_reward, FEATURES_PER_UE};
pub use train::{init_networks, train, train_from, IterationLog, PeriodicEval, TrainOutcome};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::nn::NnError;
use crate::scenario::Scenario;
use crate::score::Preference;
use crate::sim::SimError;

#[derive(Debug, Error)]
pub enum A2cError {
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error("invalid training config: {0}")]
    InvalidConfig(String),
    #[error("policy with dims {dims:?} does not fit a cell of {num_ues} UEs")]
    PolicyShape { dims: Vec<usize>, num_ues: usize },
    #[error("non-finite loss at iteration {iteration}; batch:\n{dump}")]
    NonFiniteLoss { iteration: u64, dump: String },
    #[error("compared legs consumed different exogenous draws")]
    UnfairComparison,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct A2cConfig {
    pub gamma: f64,
    /// Rollout length per environment and iteration.
    pub n_steps: usize,
    /// Reward weights.
    pub reward: Preference,
    pub entropy_coef: f64,
    pub value_coef: f64,
    pub num_envs: usize,
    pub iterations: u64,
    pub lr: f64,
    /// Defaults to half the iteration budget.
    pub lr_decay_at: Option<u64>,
    pub lr_decay_factor: f64,
    /// Hidden layer widths shared by the policy and value networks.
    pub hidden: Vec<usize>,
    /// Greedy evaluation against PF every this many updates (0 disables).
    pub eval_every: u64,
    pub eval_seeds: u32,
    pub rng_seed: u64,
}

impl Default for A2cConfig {
    fn default() -> Self {
        Self {
            gamma: 0.9,
            n_steps: 8,
            reward: Preference::default(),
            entropy_coef: 0.01,
            value_coef: 0.5,
            num_envs: 8,
            iterations: 4000,
            lr: 3e-4,
            lr_decay_at: None,
            lr_decay_factor: 0.1,
            hidden: vec![640, 640],
            eval_every: 50,
            eval_seeds: 4,
            rng_seed: 0,
        }
    }
}

impl A2cConfig {
    /// Training episodes are the scenario's KPI window.
    pub fn validate(&self, scenario: &Scenario) -> Result<(), A2cError> {
        let bad = |m: String| Err(A2cError::InvalidConfig(m));
        if !(0.0..1.0).contains(&self.gamma) {
            return bad("gamma must lie in [0, 1)".into());
        }
        if self.n_steps == 0 || self.num_envs == 0 {
            return bad("n_steps and num_envs must be at least 1".into());
        }
        if scenario.window == 0 {
            return bad("scenario window must be at least 1 TTI".into());
        }
        if !(self.lr >= 0.0 && self.lr.is_finite()) {
            return bad("lr must be finite and non-negative".into());
        }
        if self.hidden.contains(&0) {
            return bad("hidden widths must be positive".into());
        }
        Ok(())
    }
}
