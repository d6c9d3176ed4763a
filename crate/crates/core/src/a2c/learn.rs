//! n-step targets and the actor-critic objective with its gradients.

use ndarray::{Array2, ArrayView2};

use super::agent::RbgChoice;
use super::A2cError;
use crate::nn::{entropy, masked_softmax, Mlp, MlpGrads};

/// `sum_l gamma^l r_l + gamma^n bootstrap` for `n = rewards.len()`.
pub fn nstep_target(rewards: &[f64], bootstrap: f64, gamma: f64) -> f64 {
    rewards
        .iter()
        .rev()
        .fold(bootstrap, |acc, &r| r + gamma * acc)
}

/// Target of every step of a rollout, each bootstrapping from the value
/// after the rollout's last step.
pub fn rollout_targets(rewards: &[f64], bootstrap: f64, gamma: f64) -> Vec<f64> {
    let mut out = vec![0.0; rewards.len()];
    let mut acc = bootstrap;
    for t in (0..rewards.len()).rev() {
        acc = rewards[t] + gamma * acc;
        out[t] = acc;
    }
    out
}

pub fn advantage(target: f64, value: f64) -> f64 {
    target - value
}

/// One TTI of experience.
#[derive(Clone, Debug, PartialEq)]
pub struct Experience {
    /// Value-network input at the start of the TTI.
    pub state: Vec<f64>,
    /// Policy invocations of the TTI (empty when every RBG idled).
    pub choices: Vec<RbgChoice>,
    pub reward: f64,
    pub next_state: Vec<f64>,
    /// Last TTI of an episode; the target still bootstraps (truncation).
    pub done: bool,
}

/// Training batch with the return target of every TTI.
#[derive(Clone, Debug)]
pub struct UpdateBatch {
    pub experiences: Vec<Experience>,
    pub targets: Vec<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LossWeights {
    pub entropy: f64,
    pub value: f64,
}

#[derive(Clone, Debug)]
pub struct Objective {
    /// Mean over TTIs of `-(A log pi + entropy_coef * H) + value_coef * (R - V)^2`.
    pub loss: f64,
    pub policy_term: f64,
    /// Mean per-TTI entropy.
    pub entropy: f64,
    /// Mean squared TD error.
    pub value_loss: f64,
    pub policy_grads: MlpGrads,
    pub value_grads: MlpGrads,
}

fn stack(rows: impl Iterator<Item = impl AsRef<[f64]>>, width: usize) -> Array2<f64> {
    let flat: Vec<f64> = rows.flat_map(|r| r.as_ref().to_vec()).collect();
    let n = flat.len() / width.max(1);
    Array2::from_shape_vec((n, width), flat).expect("rows share a width")
}

/// State values of the batch's TTIs.
pub fn state_values(value: &Mlp, batch: &UpdateBatch) -> Vec<f64> {
    let states = stack(batch.experiences.iter().map(|e| &e.state), value.input_width());
    value
        .predict(states.view())
        .expect("value input width")
        .column(0)
        .to_vec()
}

/// Objective and gradients with `advantages` held fixed.
pub fn a2c_objective(
    policy: &Mlp,
    value: &Mlp,
    batch: &UpdateBatch,
    advantages: &[f64],
    w: LossWeights,
) -> Result<Objective, A2cError> {
    let m = batch.experiences.len();
    assert!(m > 0, "empty batch");
    assert_eq!(advantages.len(), m);
    let inv_m = 1.0 / m as f64;
    let width = policy.input_width();

    // Policy rows: one per RBG invocation; the TTI advantage applies to each.
    let rows: Vec<(&RbgChoice, f64)> = batch
        .experiences
        .iter()
        .zip(advantages)
        .flat_map(|(e, &a)| e.choices.iter().map(move |c| (c, a)))
        .collect();
    let mut policy_term = 0.0;
    let mut ent_sum = 0.0;
    let policy_grads = if rows.is_empty() {
        MlpGrads::zeros_like(policy)
    } else {
        let x = stack(rows.iter().map(|(c, _)| &c.obs), width);
        let (logits, cache) = policy.forward(x.view())?;
        let mut up = Array2::zeros(logits.raw_dim());
        for (r, (c, a)) in rows.iter().enumerate() {
            let z = logits.row(r).to_vec();
            let p = masked_softmax(&z, &c.mask)?;
            let h = entropy(&p);
            policy_term -= a * p[c.action].ln();
            ent_sum += h;
            for j in 0..p.len() {
                if p[j] <= 0.0 {
                    continue;
                }
                let onehot = if j == c.action { 1.0 } else { 0.0 };
                up[[r, j]] = inv_m * (-a * (onehot - p[j]) + w.entropy * p[j] * (p[j].ln() + h));
            }
        }
        policy.backward(&cache, up.view())
    };

    let states = stack(batch.experiences.iter().map(|e| &e.state), value.input_width());
    let (v, vcache) = value.forward(states.view())?;
    let mut vup = Array2::zeros((m, 1));
    let mut sq = 0.0;
    for t in 0..m {
        let err = batch.targets[t] - v[[t, 0]];
        sq += err * err;
        vup[[t, 0]] = -2.0 * w.value * err * inv_m;
    }
    let value_grads = value.backward(&vcache, vup.view());

    let loss = inv_m * (policy_term - w.entropy * ent_sum + w.value * sq);
    if !loss.is_finite() {
        return Err(A2cError::NonFiniteLoss {
            iteration: 0,
            dump: dump_batch(batch, advantages),
        });
    }
    Ok(Objective {
        loss,
        policy_term: policy_term * inv_m,
        entropy: ent_sum * inv_m,
        value_loss: sq * inv_m,
        policy_grads,
        value_grads,
    })
}

/// Scalar objective only, for finite-difference checks.
pub fn a2c_loss(
    policy: &Mlp,
    value: &Mlp,
    batch: &UpdateBatch,
    advantages: &[f64],
    w: LossWeights,
) -> f64 {
    let m = batch.experiences.len() as f64;
    let mut total = 0.0;
    for (e, &a) in batch.experiences.iter().zip(advantages) {
        for c in &e.choices {
            let x = ArrayView2::from_shape((1, c.obs.len()), &c.obs).expect("row");
            let z = policy.predict(x).expect("policy width").row(0).to_vec();
            let p = masked_softmax(&z, &c.mask).expect("selectable");
            total += -a * p[c.action].ln() - w.entropy * entropy(&p);
        }
    }
    let states = stack(batch.experiences.iter().map(|e| &e.state), value.input_width());
    let v = value.predict(states.view()).expect("value width");
    for (t, target) in batch.targets.iter().enumerate() {
        total += w.value * (target - v[[t, 0]]).powi(2);
    }
    total / m
}

/// Advantages from the current critic, then one SGD step on both networks.
pub fn a2c_update(
    policy: &mut Mlp,
    value: &mut Mlp,
    batch: &UpdateBatch,
    w: LossWeights,
    lr: f64,
) -> Result<Objective, A2cError> {
    let v = state_values(value, batch);
    let adv: Vec<f64> = batch
        .targets
        .iter()
        .zip(&v)
        .map(|(&r, &v)| advantage(r, v))
        .collect();
    let obj = a2c_objective(policy, value, batch, &adv, w)?;
    let non_finite = || A2cError::NonFiniteLoss {
        iteration: 0,
        dump: dump_batch(batch, &adv),
    };
    if !obj.policy_grads.is_finite() || !obj.value_grads.is_finite() {
        return Err(non_finite());
    }
    policy.sgd_step(&obj.policy_grads, lr)?;
    value.sgd_step(&obj.value_grads, lr)?;
    Ok(obj)
}

fn dump_batch(batch: &UpdateBatch, advantages: &[f64]) -> String {
    let mut s = String::new();
    for (t, e) in batch.experiences.iter().enumerate() {
        let actions: Vec<usize> = e.choices.iter().map(|c| c.action).collect();
        s.push_str(&format!(
            "t={t} reward={} target={} adv={} actions={actions:?} state={:?}\n",
            e.reward,
            batch.targets[t],
            advantages.get(t).copied().unwrap_or(f64::NAN),
            e.state
        ));
    }
    s
}
