//! Pareto list search: a beam over action prefixes, kept nondominated and
//! spread out by crowding distance.

use std::collections::HashMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::pareto::{crowding_truncate, fast_nondominated_sort};
use super::{select_final, GenieError, GenieProblem};
use crate::score::Preference;
use crate::sim::{Decision, Env, Kpis};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlaConfig {
    pub list_size: usize,
    #[serde(default)]
    pub preference: Preference,
}

impl Default for PlaConfig {
    fn default() -> Self {
        Self {
            list_size: 2000,
            preference: Preference::default(),
        }
    }
}

/// One beam entry: the action prefix and the state it leads to.
#[derive(Clone, Debug)]
pub struct SearchPath {
    pub actions: Vec<Option<usize>>,
    pub env: Env,
    pub fingerprint: u64,
    /// KPIs of the prefix so far.
    pub objectives: Kpis,
}

impl SearchPath {
    pub fn root(problem: &GenieProblem) -> Self {
        Self::at(Vec::new(), problem.start().clone())
    }

    fn at(actions: Vec<Option<usize>>, env: Env) -> Self {
        Self {
            fingerprint: env.fingerprint(),
            objectives: env.window_kpis(),
            actions,
            env,
        }
    }

    fn child(&self, action: Option<usize>) -> Self {
        let mut env = self.env.clone();
        env.step(&Decision {
            assignment: vec![action],
        })
        .expect("children only target backlogged UEs");
        let mut actions = Vec::with_capacity(self.actions.len() + 1);
        actions.extend_from_slice(&self.actions);
        actions.push(action);
        Self::at(actions, env)
    }
}

/// One child per backlogged UE of each path; a single idle child when
/// nothing is backlogged.
pub fn expand(paths: &[SearchPath]) -> Vec<SearchPath> {
    paths
        .par_iter()
        .flat_map_iter(|p| {
            let active: Vec<usize> = (0..p.env.num_ues()).filter(|&u| p.env.is_active(u)).collect();
            let children: Vec<SearchPath> = if active.is_empty() {
                vec![p.child(None)]
            } else {
                active.into_iter().map(|u| p.child(Some(u))).collect()
            };
            children
        })
        .collect()
}

fn key(p: &SearchPath) -> (u64, [u64; 3]) {
    let o = &p.objectives;
    (p.fingerprint, [o.thp.to_bits(), o.jfi.to_bits(), o.pdr.to_bits()])
}

/// Merge paths with the same state and objectives, keeping the
/// lexicographically smallest prefix. Survivors keep their input order.
pub fn dedupe(paths: Vec<SearchPath>) -> Vec<SearchPath> {
    let mut best: HashMap<(u64, [u64; 3]), usize> = HashMap::with_capacity(paths.len());
    for (i, p) in paths.iter().enumerate() {
        best.entry(key(p))
            .and_modify(|j| {
                if p.actions < paths[*j].actions {
                    *j = i;
                }
            })
            .or_insert(i);
    }
    let mut keep = vec![false; paths.len()];
    for &i in best.values() {
        keep[i] = true;
    }
    paths
        .into_iter()
        .zip(keep)
        .filter_map(|(p, k)| k.then_some(p))
        .collect()
}

/// Keep at most `list_size` paths: whole fronts first, then the splitting
/// front by descending crowding distance. Output is in front order.
pub fn prune(paths: Vec<SearchPath>, list_size: usize) -> Vec<SearchPath> {
    if paths.len() <= list_size {
        return paths;
    }
    let objs: Vec<Kpis> = paths.iter().map(|p| p.objectives).collect();
    let fronts = fast_nondominated_sort(&objs);
    let mut chosen = Vec::with_capacity(list_size);
    for front in fronts {
        let room = list_size - chosen.len();
        if room == 0 {
            break;
        }
        if front.len() <= room {
            chosen.extend(front);
        } else {
            let front_objs: Vec<Kpis> = front.iter().map(|&i| objs[i]).collect();
            chosen.extend(crowding_truncate(&front_objs, room).into_iter().map(|pos| front[pos]));
        }
    }
    let mut slots: Vec<Option<SearchPath>> = paths.into_iter().map(Some).collect();
    chosen
        .into_iter()
        .map(|i| slots[i].take().expect("each path chosen once"))
        .collect()
}

#[derive(Clone, Debug)]
pub struct PlaOutcome {
    pub paths: Vec<SearchPath>,
    /// Nondomination rank of each final path.
    pub ranks: Vec<usize>,
    /// Index into `paths` of the preferred front-0 path.
    pub selected: usize,
}

impl PlaOutcome {
    pub fn front(&self) -> impl Iterator<Item = &SearchPath> {
        self.paths.iter().zip(&self.ranks).filter(|(_, &r)| r == 0).map(|(p, _)| p)
    }

    pub fn selected_path(&self) -> &SearchPath {
        &self.paths[self.selected]
    }
}

pub fn pla_run(problem: &GenieProblem, cfg: &PlaConfig) -> Result<PlaOutcome, GenieError> {
    if cfg.list_size == 0 {
        return Err(GenieError::InvalidConfig("list_size must be at least 1".into()));
    }
    if problem.num_rbgs() != 1 {
        return Err(GenieError::MultiRbg("Pareto list search"));
    }
    let mut paths = vec![SearchPath::root(problem)];
    for _ in 0..problem.horizon() {
        paths = prune(dedupe(expand(&paths)), cfg.list_size);
    }
    let objs: Vec<Kpis> = paths.iter().map(|p| p.objectives).collect();
    let mut ranks = vec![0; paths.len()];
    for (r, front) in fast_nondominated_sort(&objs).iter().enumerate() {
        for &i in front {
            ranks[i] = r;
        }
    }
    let front_idx: Vec<usize> = (0..paths.len()).filter(|&i| ranks[i] == 0).collect();
    let front_objs: Vec<Kpis> = front_idx.iter().map(|&i| objs[i]).collect();
    let pick = select_final(&front_objs, &cfg.preference).expect("final list is nonempty");
    Ok(PlaOutcome {
        selected: front_idx[pick],
        paths,
        ranks,
    })
}
