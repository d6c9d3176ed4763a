//! NSGA-II over real-coded UE-index sequences.
//!
//! Gene `t * B + b` holds the UE for RBG `b` in TTI `t` as a real value in
//! `[1, K]`; it decodes by rounding to the nearest integer.

use std::cmp::Ordering;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::pareto::{crowding_distance, crowding_truncate, fast_nondominated_sort, hypervolume};
use super::{GenieError, GenieProblem, HV_REFERENCE};
use crate::sim::{Decision, Kpis};

const EPS: f64 = 1e-14;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GaConfig {
    pub population: usize,
    pub generations: usize,
    pub p_c: f64,
    pub p_m: f64,
    pub eta_c: f64,
    pub eta_m: f64,
    pub rng_seed: u64,
}

impl Default for GaConfig {
    fn default() -> Self {
        Self {
            population: 200,
            generations: 500,
            p_c: 0.95,
            p_m: 0.05,
            eta_c: 5.0,
            eta_m: 20.0,
            rng_seed: 0,
        }
    }
}

impl GaConfig {
    pub fn validate(&self) -> Result<(), GenieError> {
        let bad = |m: &str| Err(GenieError::InvalidConfig(m.to_string()));
        if self.population < 2 || !self.population.is_multiple_of(2) {
            return bad("population must be even and at least 2");
        }
        if !(0.0..=1.0).contains(&self.p_c) || !(0.0..=1.0).contains(&self.p_m) {
            return bad("p_c and p_m must lie in [0, 1]");
        }
        if !(self.eta_c >= 0.0 && self.eta_m >= 0.0) {
            return bad("distribution indices must be non-negative");
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Genome {
    pub genes: Vec<f64>,
    pub objectives: Option<Kpis>,
}

/// A population member with its nondomination rank and crowding distance.
#[derive(Clone, Debug, PartialEq)]
pub struct GaMember {
    pub genes: Vec<f64>,
    pub objectives: Kpis,
    pub rank: usize,
    pub crowding: f64,
}

impl GaMember {
    pub fn genome(&self) -> Genome {
        Genome {
            genes: self.genes.clone(),
            objectives: Some(self.objectives),
        }
    }
}

#[derive(Clone, Debug)]
pub struct GaOutcome {
    /// Front 0 of the final population, in population order.
    pub front: Vec<GaMember>,
    pub population: Vec<GaMember>,
    /// Hypervolume of front 0 after initialization and after each generation.
    pub hypervolume: Vec<f64>,
}

/// Gene value to UE index.
fn gene_ue(g: f64, num_ues: usize) -> usize {
    (g.round() as i64 - 1).clamp(0, num_ues as i64 - 1) as usize
}

/// Genes to per-TTI decisions (before empty-buffer sanitizing).
pub fn decode(genes: &[f64], num_ues: usize, num_rbgs: usize) -> Vec<Decision> {
    genes
        .chunks(num_rbgs)
        .map(|tti| Decision {
            assignment: tti.iter().map(|&g| Some(gene_ue(g, num_ues))).collect(),
        })
        .collect()
}

/// Genes reproducing `decisions` once sanitized. Idle slots become UE 1,
/// which replays as idle whenever nobody is backlogged.
pub fn encode_decisions(decisions: &[Decision]) -> Vec<f64> {
    decisions
        .iter()
        .flat_map(|d| d.assignment.iter().map(|ue| ue.map_or(1.0, |k| k as f64 + 1.0)))
        .collect()
}

pub fn evaluate_genome(genes: &[f64], problem: &GenieProblem) -> Kpis {
    problem.replay(&decode(genes, problem.num_ues(), problem.num_rbgs()))
}

/// Simulated binary crossover with bounds `[lo, hi]`.
pub fn sbx_crossover<R: Rng + ?Sized>(
    p1: &[f64],
    p2: &[f64],
    eta_c: f64,
    p_c: f64,
    lo: f64,
    hi: f64,
    rng: &mut R,
) -> (Vec<f64>, Vec<f64>) {
    assert_eq!(p1.len(), p2.len(), "parents differ in length");
    let mut c1 = p1.to_vec();
    let mut c2 = p2.to_vec();
    if p_c <= 0.0 || rng.random::<f64>() > p_c {
        return (c1, c2);
    }
    let expo = 1.0 / (eta_c + 1.0);
    let spread = |beta: f64, u: f64| {
        let alpha = 2.0 - beta.powf(-(eta_c + 1.0));
        if u <= 1.0 / alpha {
            (u * alpha).powf(expo)
        } else {
            (1.0 / (2.0 - u * alpha)).powf(expo)
        }
    };
    for i in 0..p1.len() {
        if rng.random::<f64>() > 0.5 {
            continue;
        }
        if (p1[i] - p2[i]).abs() <= EPS {
            continue;
        }
        let (y1, y2) = if p1[i] < p2[i] { (p1[i], p2[i]) } else { (p2[i], p1[i]) };
        let gap = y2 - y1;
        let u: f64 = rng.random();
        let bq1 = spread(1.0 + 2.0 * (y1 - lo) / gap, u);
        let a = (0.5 * ((y1 + y2) - bq1 * gap)).clamp(lo, hi);
        let bq2 = spread(1.0 + 2.0 * (hi - y2) / gap, u);
        let b = (0.5 * ((y1 + y2) + bq2 * gap)).clamp(lo, hi);
        if rng.random::<f64>() <= 0.5 {
            c1[i] = b;
            c2[i] = a;
        } else {
            c1[i] = a;
            c2[i] = b;
        }
    }
    (c1, c2)
}

/// Bounded polynomial mutation, gene-wise with probability `p_m`.
pub fn polynomial_mutation<R: Rng + ?Sized>(
    genes: &mut [f64],
    eta_m: f64,
    p_m: f64,
    lo: f64,
    hi: f64,
    rng: &mut R,
) {
    if p_m <= 0.0 || hi <= lo {
        return;
    }
    let expo = 1.0 / (eta_m + 1.0);
    for y in genes.iter_mut() {
        if rng.random::<f64>() > p_m {
            continue;
        }
        let span = hi - lo;
        let d1 = (*y - lo) / span;
        let d2 = (hi - *y) / span;
        let u: f64 = rng.random();
        let dq = if u <= 0.5 {
            let v = 2.0 * u + (1.0 - 2.0 * u) * (1.0 - d1).powf(eta_m + 1.0);
            v.powf(expo) - 1.0
        } else {
            let v = 2.0 * (1.0 - u) + 2.0 * (u - 0.5) * (1.0 - d2).powf(eta_m + 1.0);
            1.0 - v.powf(expo)
        };
        *y = (*y + dq * span).clamp(lo, hi);
    }
}

/// Crowded comparison: lower rank wins, then larger crowding distance.
fn crowded_better(a: &GaMember, b: &GaMember) -> bool {
    match a.rank.cmp(&b.rank) {
        Ordering::Less => true,
        Ordering::Greater => false,
        Ordering::Equal => a.crowding > b.crowding,
    }
}

fn tournament<'a, R: Rng + ?Sized>(pop: &'a [GaMember], rng: &mut R) -> &'a GaMember {
    let a = &pop[rng.random_range(0..pop.len())];
    let b = &pop[rng.random_range(0..pop.len())];
    if crowded_better(b, a) {
        b
    } else {
        a
    }
}

fn evaluate_all(problem: &GenieProblem, genomes: Vec<Vec<f64>>) -> Vec<(Vec<f64>, Kpis)> {
    genomes
        .into_par_iter()
        .map(|g| {
            let o = evaluate_genome(&g, problem);
            (g, o)
        })
        .collect()
}

/// Elitist survival of `take` members out of `pool`, with ranks and
/// crowding assigned from the sort of `pool`.
fn survive(pool: Vec<(Vec<f64>, Kpis)>, take: usize) -> Vec<GaMember> {
    let objs: Vec<Kpis> = pool.iter().map(|(_, o)| *o).collect();
    let fronts = fast_nondominated_sort(&objs);
    let mut slots: Vec<Option<(Vec<f64>, Kpis)>> = pool.into_iter().map(Some).collect();
    let mut out = Vec::with_capacity(take);
    for (rank, front) in fronts.iter().enumerate() {
        if out.len() >= take {
            break;
        }
        let front_objs: Vec<Kpis> = front.iter().map(|&i| objs[i]).collect();
        let dist = crowding_distance(&front_objs);
        let chosen: Vec<usize> = if out.len() + front.len() <= take {
            (0..front.len()).collect()
        } else {
            crowding_truncate(&front_objs, take - out.len())
        };
        for pos in chosen {
            let (genes, objectives) = slots[front[pos]].take().expect("each index used once");
            out.push(GaMember {
                genes,
                objectives,
                rank,
                crowding: dist[pos],
            });
        }
    }
    out
}

fn front_hypervolume(pop: &[GaMember]) -> f64 {
    let front: Vec<Kpis> = pop.iter().filter(|m| m.rank == 0).map(|m| m.objectives).collect();
    hypervolume(&front, &HV_REFERENCE)
}

/// Run NSGA-II on `problem`. `seeds` (e.g. encoded baseline schedules)
/// replace the first members of the random initial population.
pub fn nsga2_run(
    problem: &GenieProblem,
    cfg: &GaConfig,
    seeds: &[Vec<f64>],
) -> Result<GaOutcome, GenieError> {
    cfg.validate()?;
    let q = problem.genome_len();
    if let Some(s) = seeds.iter().find(|s| s.len() != q) {
        return Err(GenieError::InvalidConfig(format!(
            "seed genome has {} genes, expected {q}",
            s.len()
        )));
    }
    let lo = 1.0;
    let hi = problem.num_ues() as f64;
    let p = cfg.population;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);

    let mut init: Vec<Vec<f64>> = seeds.iter().take(p).cloned().collect();
    while init.len() < p {
        init.push((0..q).map(|_| rng.random_range(lo..=hi)).collect());
    }
    let mut pop = survive(evaluate_all(problem, init), p);
    let mut hv = vec![front_hypervolume(&pop)];

    for _ in 0..cfg.generations {
        let mut children = Vec::with_capacity(p);
        while children.len() < p {
            let a = tournament(&pop, &mut rng);
            let b = tournament(&pop, &mut rng);
            let (mut c1, mut c2) = sbx_crossover(&a.genes, &b.genes, cfg.eta_c, cfg.p_c, lo, hi, &mut rng);
            polynomial_mutation(&mut c1, cfg.eta_m, cfg.p_m, lo, hi, &mut rng);
            polynomial_mutation(&mut c2, cfg.eta_m, cfg.p_m, lo, hi, &mut rng);
            children.push(c1);
            children.push(c2);
        }
        let mut pool: Vec<(Vec<f64>, Kpis)> =
            pop.into_iter().map(|m| (m.genes, m.objectives)).collect();
        pool.extend(evaluate_all(problem, children));
        pop = survive(pool, p);
        hv.push(front_hypervolume(&pop));
    }

    let front = pop.iter().filter(|m| m.rank == 0).cloned().collect();
    Ok(GaOutcome {
        front,
        population: pop,
        hypervolume: hv,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::{Env, SimConfig};

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    #[test]
    fn no_crossover_copies_parents() {
        let p1 = vec![1.0, 2.5, 3.0];
        let p2 = vec![2.0, 1.5, 4.0];
        let (c1, c2) = sbx_crossover(&p1, &p2, 5.0, 0.0, 1.0, 5.0, &mut rng(1));
        assert_eq!((c1, c2), (p1, p2));
    }

    #[test]
    fn identical_parents_reproduce() {
        let p = vec![1.3, 2.0, 4.7];
        let mut r = rng(2);
        for _ in 0..100 {
            let (c1, c2) = sbx_crossover(&p, &p, 5.0, 1.0, 1.0, 5.0, &mut r);
            assert_eq!(c1, p);
            assert_eq!(c2, p);
        }
    }

    #[test]
    fn sbx_children_in_bounds() {
        let mut r = rng(3);
        for _ in 0..1000 {
            let p1: Vec<f64> = (0..8).map(|_| r.random_range(1.0..=5.0)).collect();
            let p2: Vec<f64> = (0..8).map(|_| r.random_range(1.0..=5.0)).collect();
            let (c1, c2) = sbx_crossover(&p1, &p2, 5.0, 1.0, 1.0, 5.0, &mut r);
            assert!(c1.iter().chain(&c2).all(|g| (1.0..=5.0).contains(g)));
        }
    }

    #[test]
    fn zero_mutation_is_identity() {
        let mut g = vec![1.5, 2.5];
        polynomial_mutation(&mut g, 20.0, 0.0, 1.0, 5.0, &mut rng(4));
        assert_eq!(g, vec![1.5, 2.5]);
    }

    /// Closed-form CDF of the perturbation `dq` for a gene at the centre of
    /// its range (both boundary distances 1/2), derived from the inverse
    /// transform used by the mutation.
    fn centre_cdf(x: f64, eta: f64) -> f64 {
        let c = 0.5f64.powf(eta + 1.0);
        if x <= -0.5 {
            0.0
        } else if x < 0.0 {
            ((1.0 + x).powf(eta + 1.0) - c) / (2.0 * (1.0 - c))
        } else if x < 0.5 {
            1.0 - ((1.0 - x).powf(eta + 1.0) - c) / (2.0 * (1.0 - c))
        } else {
            1.0
        }
    }

    #[test]
    fn mutation_centre_distribution() {
        let (lo, hi, eta) = (1.0, 5.0, 20.0);
        let centre = 3.0;
        let mut r = rng(5);
        let n = 100_000;
        let samples: Vec<f64> = (0..n)
            .map(|_| {
                let mut g = [centre];
                polynomial_mutation(&mut g, eta, 1.0, lo, hi, &mut r);
                (g[0] - centre) / (hi - lo)
            })
            .collect();
        let above = samples.iter().filter(|&&d| d > 0.0).count() as f64 / n as f64;
        let below = samples.iter().filter(|&&d| d < 0.0).count() as f64 / n as f64;
        assert!((above - below).abs() < 0.02, "skew {above} vs {below}");
        for x in [-0.2, -0.1, -0.05, -0.01, 0.01, 0.05, 0.1, 0.2] {
            let emp = samples.iter().filter(|&&d| d <= x).count() as f64 / n as f64;
            let exact = centre_cdf(x, eta);
            assert!((emp - exact).abs() < 0.005, "cdf at {x}: {emp} vs {exact}");
        }
    }

    #[test]
    fn decode_rounds_and_clamps() {
        let d = decode(&[1.0, 1.49, 1.5, 3.0, 2.6, 0.2], 3, 2);
        assert_eq!(d.len(), 3);
        assert_eq!(d[0].assignment, vec![Some(0), Some(0)]);
        assert_eq!(d[1].assignment, vec![Some(1), Some(2)]);
        assert_eq!(d[2].assignment, vec![Some(2), Some(0)]);
    }

    fn small_problem(k: usize, n: usize, seed: u64) -> GenieProblem {
        let mut cfg = SimConfig::desk_scale(k, 1);
        cfg.rng_seed = seed;
        let mut env = Env::new(cfg).unwrap();
        crate::scenario::warm_up(&mut env, 20);
        GenieProblem::from_env(&env, n).unwrap()
    }

    #[test]
    fn zero_generations_front_of_initial() {
        let problem = small_problem(2, 6, 7);
        let cfg = GaConfig {
            population: 8,
            generations: 0,
            ..GaConfig::default()
        };
        let out = nsga2_run(&problem, &cfg, &[]).unwrap();
        assert_eq!(out.population.len(), 8);
        assert_eq!(out.hypervolume.len(), 1);
        let objs: Vec<Kpis> = out.population.iter().map(|m| m.objectives).collect();
        let expect = super::super::pareto::nondominated(&objs);
        assert_eq!(out.front.len(), expect.len());
    }

    #[test]
    fn deterministic_per_seed() {
        let problem = small_problem(3, 8, 9);
        let cfg = GaConfig {
            population: 16,
            generations: 10,
            rng_seed: 42,
            ..GaConfig::default()
        };
        let a = nsga2_run(&problem, &cfg, &[]).unwrap();
        let b = nsga2_run(&problem, &cfg, &[]).unwrap();
        assert_eq!(a.population, b.population);
        assert_eq!(a.hypervolume, b.hypervolume);
    }

    #[test]
    fn odd_population_rejected() {
        let problem = small_problem(2, 4, 1);
        let cfg = GaConfig {
            population: 7,
            ..GaConfig::default()
        };
        assert!(matches!(
            nsga2_run(&problem, &cfg, &[]),
            Err(GenieError::InvalidConfig(_))
        ));
    }
}
