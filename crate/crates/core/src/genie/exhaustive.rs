//! Brute-force enumeration for tiny windows, used as a ground truth.

use super::pareto::nondominated;
use super::{GenieError, GenieProblem};
use crate::sim::{Decision, Env, Kpis};

/// Largest number of sequences [`enumerate`] will visit.
pub const MAX_EXHAUSTIVE: u64 = 1_000_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ActionSpace {
    /// Every UE-index sequence in `{1..K}^N`; picks of empty buffers
    /// replay as idle. This is the space the GA searches.
    Sequences,
    /// One branch per backlogged UE, idle only when nobody is backlogged.
    /// This is the tree the Pareto list search explores.
    ActiveTree,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Outcome {
    /// Chosen UE per TTI as given (not sanitized) for `Sequences`; the
    /// replayed actions for `ActiveTree`.
    pub actions: Vec<Option<usize>>,
    pub objectives: Kpis,
}

/// Replay every sequence of `space` in lexicographic order.
pub fn enumerate(problem: &GenieProblem, space: ActionSpace) -> Result<Vec<Outcome>, GenieError> {
    if problem.num_rbgs() != 1 {
        return Err(GenieError::MultiRbg("exhaustive search"));
    }
    let size = (problem.num_ues() as f64).powi(problem.horizon() as i32);
    if size > MAX_EXHAUSTIVE as f64 {
        return Err(GenieError::SearchTooLarge {
            size,
            limit: MAX_EXHAUSTIVE,
        });
    }
    let mut out = Vec::new();
    let mut prefix = Vec::with_capacity(problem.horizon());
    visit(problem.start(), problem.horizon(), space, &mut prefix, &mut out);
    Ok(out)
}

fn visit(
    env: &Env,
    remaining: usize,
    space: ActionSpace,
    prefix: &mut Vec<Option<usize>>,
    out: &mut Vec<Outcome>,
) {
    if remaining == 0 {
        out.push(Outcome {
            actions: prefix.clone(),
            objectives: env.window_kpis(),
        });
        return;
    }
    let k = env.num_ues();
    let branches: Vec<(Option<usize>, Option<usize>)> = match space {
        // (recorded, replayed)
        ActionSpace::Sequences => (0..k)
            .map(|ue| (Some(ue), Some(ue).filter(|&u| env.is_active(u))))
            .collect(),
        ActionSpace::ActiveTree => {
            let active: Vec<_> = (0..k).filter(|&u| env.is_active(u)).map(|u| (Some(u), Some(u))).collect();
            if active.is_empty() {
                vec![(None, None)]
            } else {
                active
            }
        }
    };
    for (recorded, replayed) in branches {
        let mut child = env.clone();
        child
            .step(&Decision {
                assignment: vec![replayed],
            })
            .expect("replayed actions target backlogged UEs");
        prefix.push(recorded);
        visit(&child, remaining - 1, space, prefix, out);
        prefix.pop();
    }
}

/// The Pareto set of `space`: one outcome (the lexicographically first)
/// per distinct nondominated objective triple.
pub fn exhaustive_search(
    problem: &GenieProblem,
    space: ActionSpace,
) -> Result<Vec<Outcome>, GenieError> {
    let all = enumerate(problem, space)?;
    let objs: Vec<Kpis> = all.iter().map(|o| o.objectives).collect();
    let mut front: Vec<Outcome> = Vec::new();
    for i in nondominated(&objs) {
        if !front.iter().any(|f| f.objectives == objs[i]) {
            front.push(all[i].clone());
        }
    }
    Ok(front)
}
