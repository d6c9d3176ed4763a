//! The policy network as a scheduler, reused RBG by RBG within a TTI.

use std::sync::Arc;

use ndarray::ArrayView2;
use rand_chacha::ChaCha8Rng;

use super::obs::{build_obs, obs_width};
use super::A2cError;
use crate::nn::{argmax_masked, masked_softmax, sample_categorical, Mlp};
use crate::sched::Scheduler;
use crate::sim::{Decision, Env};

/// One policy invocation: what it saw and what it picked.
#[derive(Clone, Debug, PartialEq)]
pub struct RbgChoice {
    pub rbg: usize,
    pub obs: Vec<f64>,
    pub mask: Vec<bool>,
    pub action: usize,
    pub prob: f64,
}

/// Check that `policy` maps this cell's observations to one logit per UE.
pub fn check_policy(policy: &Mlp, num_ues: usize) -> Result<(), A2cError> {
    let dims = policy.dims();
    let expect = (obs_width(num_ues), num_ues);
    if (policy.input_width(), policy.output_width()) != expect {
        return Err(A2cError::PolicyShape {
            dims,
            num_ues,
        });
    }
    Ok(())
}

/// Pick a UE per RBG. After each pick the chosen UE's queue view shrinks by
/// the expected service `rate * (1 - bler)`; UEs whose view reaches zero
/// are masked for the remaining RBGs. RBGs with nothing selectable idle.
///
/// Samples from the policy when `rng` is given, otherwise takes the argmax.
pub fn decide_multi_rbg(
    policy: &Mlp,
    env: &Env,
    mut rng: Option<&mut ChaCha8Rng>,
) -> (Decision, Vec<RbgChoice>) {
    let k = env.num_ues();
    let b = env.num_rbgs();
    let mut reserved = vec![0.0; k];
    let mut assignment = Vec::with_capacity(b);
    let mut choices = Vec::with_capacity(b);
    for rbg in 0..b {
        let (obs, mask) = build_obs(env, rbg, &reserved);
        if !mask.iter().any(|&m| m) {
            assignment.push(None);
            continue;
        }
        let row = ArrayView2::from_shape((1, obs.len()), &obs).expect("one row");
        let logits = policy.predict(row).expect("policy shape checked");
        let probs = masked_softmax(logits.as_slice().expect("standard layout"), &mask)
            .expect("some UE selectable");
        let action = match rng.as_deref_mut() {
            Some(r) => sample_categorical(&probs, r),
            None => argmax_masked(&probs, &mask).expect("some UE selectable"),
        };
        let lc = env.link_choice(action, rbg);
        reserved[action] += lc.rate as f64 * (1.0 - lc.bler);
        assignment.push(Some(action));
        choices.push(RbgChoice {
            rbg,
            obs,
            mask,
            action,
            prob: probs[action],
        });
    }
    (Decision { assignment }, choices)
}

/// Greedy or sampling DRL scheduler.
#[derive(Clone, Debug)]
pub struct DrlScheduler {
    policy: Arc<Mlp>,
    rng: Option<ChaCha8Rng>,
}

impl DrlScheduler {
    pub fn greedy(policy: Arc<Mlp>, num_ues: usize) -> Result<Self, A2cError> {
        check_policy(&policy, num_ues)?;
        Ok(Self { policy, rng: None })
    }

    pub fn sampling(policy: Arc<Mlp>, num_ues: usize, rng: ChaCha8Rng) -> Result<Self, A2cError> {
        check_policy(&policy, num_ues)?;
        Ok(Self {
            policy,
            rng: Some(rng),
        })
    }
}

impl Scheduler for DrlScheduler {
    fn name(&self) -> &str {
        "drl"
    }

    fn decide(&mut self, env: &Env) -> Decision {
        decide_multi_rbg(&self.policy, env, self.rng.as_mut()).0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::SimConfig;
    use rand::SeedableRng;

    fn net(k: usize, seed: u64) -> Mlp {
        Mlp::he_uniform(&[obs_width(k), 16, k], &mut ChaCha8Rng::seed_from_u64(seed))
    }

    #[test]
    fn single_rbg_one_invocation() {
        let mut env = Env::new(SimConfig::desk_scale(3, 1)).unwrap();
        crate::scenario::warm_up(&mut env, 20);
        let (d, c) = decide_multi_rbg(&net(3, 1), &env, None);
        assert_eq!(d.assignment.len(), 1);
        assert!(c.len() <= 1);
        env.check_decision(&d).unwrap();
    }

    #[test]
    fn tiny_queue_frees_later_rbgs() {
        let mut cfg = SimConfig::desk_scale(1, 6);
        cfg.arrival_rate = 5.0;
        cfg.packet_size = 8;
        cfg.mean_snr_per_ue = vec![40.0];
        let mut env = Env::new(cfg).unwrap();
        env.step(&Decision::idle(6)).unwrap();
        assert!(!env.buffers()[0].is_empty());
        let (d, c) = decide_multi_rbg(&net(1, 2), &env, None);
        // Assigned until the first RBG whose expected service covers the
        // few queued bits, idle afterwards.
        let queued = env.buffers()[0].queued_bits() as f64;
        let mut expected = 0.0;
        let covering = (0..6)
            .find(|&b| {
                let lc = env.link_choice(0, b);
                expected += lc.rate as f64 * (1.0 - lc.bler);
                expected >= queued
            })
            .unwrap();
        for (b, a) in d.assignment.iter().enumerate() {
            assert_eq!(a.is_some(), b <= covering, "rbg {b}");
        }
        assert_eq!(c.len(), covering + 1);
    }

    #[test]
    fn greedy_is_reproducible_and_sampling_respects_mask() {
        let mut env = Env::new(SimConfig::desk_scale(4, 3)).unwrap();
        crate::scenario::warm_up(&mut env, 30);
        let p = Arc::new(net(4, 3));
        let mut a = DrlScheduler::greedy(Arc::clone(&p), 4).unwrap();
        let mut b = DrlScheduler::greedy(Arc::clone(&p), 4).unwrap();
        let mut s = DrlScheduler::sampling(p, 4, ChaCha8Rng::seed_from_u64(9)).unwrap();
        for _ in 0..200 {
            let da = a.decide(&env);
            assert_eq!(da, b.decide(&env));
            let ds = s.decide(&env);
            env.check_decision(&ds).unwrap();
            env.step(&da).unwrap();
        }
    }

    #[test]
    fn wrong_shape_rejected() {
        assert!(matches!(
            DrlScheduler::greedy(Arc::new(net(3, 0)), 4),
            Err(A2cError::PolicyShape { .. })
        ));
    }
}
