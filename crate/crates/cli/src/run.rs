//! Run modes and the run manifest.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{anyhow, bail, Context, Result};
use rayon::prelude::*;
use schedlab::a2c::{compare_from_snapshot, summarize, train, DrlScheduler, EvalReport, TrainOutcome};
use schedlab::genie::{
    encode_decisions, nsga2_run, pla_run, select_final, GaOutcome, GenieProblem, PlaConfig, PlaOutcome,
};
use schedlab::nn::Mlp;
use schedlab::scenario::{run_kpis, Scenario};
use schedlab::sched::{by_name, MaxCi, ProportionalFair, RoundRobin, Scheduler};
use schedlab::score::max_throughput;
use schedlab::seeds::derive_seed;
use schedlab::sim::Kpis;
use serde::{Deserialize, Serialize};

use crate::config::{ExperimentConfig, Mode};
use crate::output::{num, sha256_hex, Artifact, CsvMeta, OutputDir, Table};

pub const MANIFEST_FILE: &str = "manifest.json";

const KPI_HEADER: &[&str] = &["deployment", "seed", "method", "thp", "jfi", "pdr", "score"];
const GAIN_HEADER: &[&str] = &["deployment", "seed", "thp_gain", "jfi_gain", "pdr_gain"];

/// Command-line overrides of one run.
#[derive(Clone, Debug, Default)]
pub struct RunOptions {
    pub checkpoint: Option<PathBuf>,
    pub transfer_rbgs: Option<usize>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckpointRef {
    pub path: PathBuf,
    pub sha256: String,
}

/// Everything needed to repeat a run, plus hashes of what it wrote.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub schema: String,
    pub version: String,
    pub mode: String,
    /// The config with `--seed` and `--out` applied.
    pub config: ExperimentConfig,
    pub checkpoint: Option<CheckpointRef>,
    pub transfer_rbgs: Option<usize>,
    pub sim_hash: String,
    pub deployment_seeds: Vec<u64>,
    pub artifacts: Vec<Artifact>,
}

pub fn parse_mode(name: &str) -> Option<Mode> {
    Some(match name {
        "train" => Mode::Train,
        "eval" => Mode::Eval,
        "genie-ga" => Mode::GenieGa,
        "genie-pla" => Mode::GeniePla,
        "baseline" => Mode::Baseline,
        _ => return None,
    })
}

/// Per-deployment seeds, a pure function of the master seed.
pub fn deployment_seeds(master: u64, count: u32) -> Vec<u64> {
    (0..count as u64).map(|i| derive_seed(master, i, "deployment")).collect()
}

struct Ctx {
    cfg: ExperimentConfig,
    mode: Mode,
    scenario: Scenario,
    master: u64,
    seeds: Vec<u64>,
    sim_hash: String,
    policy: Option<(Arc<Mlp>, CheckpointRef)>,
    out: OutputDir,
}

impl Ctx {
    fn meta(&self, kind: &str, method: &str) -> CsvMeta {
        CsvMeta {
            kind: kind.into(),
            method: method.into(),
            sim_hash: self.sim_hash.clone(),
            pref: self.cfg.preference,
            thp_ref: max_throughput(&self.scenario.base),
        }
    }

    fn score(&self, k: &Kpis) -> f64 {
        self.cfg.preference.score(k, max_throughput(&self.scenario.base))
    }

    fn kpi_row(&self, i: usize, method: &str, k: &Kpis) -> Vec<String> {
        vec![
            i.to_string(),
            self.seeds[i].to_string(),
            method.to_string(),
            num(k.thp),
            num(k.jfi),
            num(k.pdr),
            num(self.score(k)),
        ]
    }

    /// KPI table with one row per (deployment, method) and a mean row per method.
    fn kpi_table(&self, method: &str, rows: &[(String, Vec<Kpis>)]) -> Table {
        let mut t = Table::new(self.meta("kpis", method), KPI_HEADER);
        for i in 0..self.seeds.len() {
            for (m, ks) in rows {
                t.push(self.kpi_row(i, m, &ks[i]));
            }
        }
        for (m, ks) in rows {
            let n = ks.len() as f64;
            let mean = |f: fn(&Kpis) -> f64| ks.iter().map(f).sum::<f64>() / n;
            let score = ks.iter().map(|k| self.score(k)).sum::<f64>() / n;
            t.push(vec![
                "mean".into(),
                String::new(),
                m.clone(),
                num(mean(|k| k.thp)),
                num(mean(|k| k.jfi)),
                num(mean(|k| k.pdr)),
                num(score),
            ]);
        }
        t
    }
}

pub fn run_file(config: &Path, mode: Mode, opts: &RunOptions) -> Result<Manifest> {
    let text = fs::read_to_string(config).with_context(|| format!("reading {}", config.display()))?;
    let cfg = ExperimentConfig::from_toml_str(&text)?;
    run(cfg, mode, opts)
}

/// Repeat the run recorded in a manifest. `out` overrides its output directory.
pub fn rerun(manifest: &Path, out: Option<PathBuf>) -> Result<Manifest> {
    let text = fs::read_to_string(manifest).with_context(|| format!("reading {}", manifest.display()))?;
    let m: Manifest = serde_json::from_str(&text).context("parsing manifest")?;
    let mode = parse_mode(&m.mode).ok_or_else(|| anyhow!("unknown mode `{}` in manifest", m.mode))?;
    let opts = RunOptions {
        checkpoint: m.checkpoint.as_ref().map(|c| c.path.clone()),
        transfer_rbgs: m.transfer_rbgs,
        seed: None,
        out,
    };
    let again = run(m.config.clone(), mode, &opts)?;
    if let (Some(a), Some(b)) = (&m.checkpoint, &again.checkpoint) {
        if a.sha256 != b.sha256 {
            bail!("checkpoint {} changed since the manifest was written", a.path.display());
        }
    }
    Ok(again)
}

pub fn run(mut cfg: ExperimentConfig, mode: Mode, opts: &RunOptions) -> Result<Manifest> {
    cfg.check_mode(mode)?;
    if let Some(s) = opts.seed {
        cfg.scenario.master_seed = s;
    }
    if let Some(o) = &opts.out {
        cfg.scenario.output_dir = o.clone();
    }
    if opts.transfer_rbgs.is_some() && mode != Mode::Eval {
        bail!("--transfer-rbgs only applies to mode eval");
    }
    let needs_policy = mode == Mode::Eval || (mode == Mode::Baseline && cfg.scenario.scheduler == "drl");
    let policy = match (&opts.checkpoint, needs_policy) {
        (Some(p), true) => {
            let bytes = fs::read(p).with_context(|| format!("reading checkpoint {}", p.display()))?;
            let mlp = Mlp::from_bytes(&bytes).with_context(|| format!("loading checkpoint {}", p.display()))?;
            Some((
                Arc::new(mlp),
                CheckpointRef {
                    path: p.clone(),
                    sha256: sha256_hex(&bytes),
                },
            ))
        }
        (None, true) => bail!("mode {} needs --checkpoint <policy.nn>", mode.name()),
        (Some(_), false) => bail!("--checkpoint is not used by mode {}", mode.name()),
        (None, false) => None,
    };

    let scenario = cfg.scenario(opts.transfer_rbgs)?;
    let master = cfg.scenario.master_seed;
    let seeds = deployment_seeds(master, cfg.scenario.num_deployments);
    let sim_hash = cfg.sim_hash(&scenario, master);
    let out = OutputDir::create(&cfg.scenario.output_dir)?;
    let mut ctx = Ctx {
        cfg,
        mode,
        scenario,
        master,
        seeds,
        sim_hash,
        policy,
        out,
    };
    match mode {
        Mode::Baseline => baseline(&mut ctx)?,
        Mode::Eval => eval(&mut ctx)?,
        Mode::Train => train_mode(&mut ctx)?,
        Mode::GenieGa => genie_ga(&mut ctx)?,
        Mode::GeniePla => genie_pla(&mut ctx)?,
    }
    let manifest = Manifest {
        schema: "schedlab-manifest v1".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        mode: ctx.mode.name().into(),
        checkpoint: ctx.policy.as_ref().map(|(_, c)| c.clone()),
        transfer_rbgs: opts.transfer_rbgs,
        sim_hash: ctx.sim_hash.clone(),
        deployment_seeds: ctx.seeds.clone(),
        artifacts: ctx.out.artifacts().to_vec(),
        config: ctx.cfg,
    };
    let text = serde_json::to_string_pretty(&manifest)? + "\n";
    fs::write(ctx.out.path(MANIFEST_FILE), text)?;
    Ok(manifest)
}

fn baseline(ctx: &mut Ctx) -> Result<()> {
    let name = ctx.cfg.scenario.scheduler.clone();
    let k = ctx.scenario.base.num_ues;
    let policy = ctx.policy.as_ref().map(|(p, _)| Arc::clone(p));
    let kpis: Vec<Kpis> = ctx
        .seeds
        .par_iter()
        .map(|&seed| {
            let mut s: Box<dyn Scheduler + Send> = match &policy {
                Some(p) => Box::new(DrlScheduler::greedy(Arc::clone(p), k)?),
                None => by_name(&name, k).ok_or_else(|| anyhow!("unknown scheduler `{name}`"))?,
            };
            let mut env = ctx.scenario.instantiate(seed)?;
            Ok(run_kpis(&mut env, s.as_mut(), ctx.scenario.window)?)
        })
        .collect::<Result<_>>()?;
    let t = ctx.kpi_table(&name, &[(name.clone(), kpis)]);
    ctx.out.write_table("kpis.csv", &t)
}

/// Same-snapshot comparison of the greedy policy against PF, per deployment.
fn compare_policy(ctx: &Ctx, policy: &Arc<Mlp>) -> Result<EvalReport> {
    let k = ctx.scenario.base.num_ues;
    let pref = ctx.cfg.preference;
    let per_seed = ctx
        .seeds
        .par_iter()
        .map(|&seed| {
            let env = ctx.scenario.instantiate(seed)?;
            let mut s = DrlScheduler::greedy(Arc::clone(policy), k)?;
            Ok(compare_from_snapshot(&env, &mut s, ctx.scenario.window, &pref, seed)?)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(summarize(per_seed))
}

fn write_eval(ctx: &mut Ctx, report: &EvalReport) -> Result<()> {
    let drl: Vec<Kpis> = report.per_seed.iter().map(|c| c.candidate.kpis).collect();
    let pf: Vec<Kpis> = report.per_seed.iter().map(|c| c.pf.kpis).collect();
    let t = ctx.kpi_table("drl", &[("drl".into(), drl), ("pf".into(), pf)]);
    ctx.out.write_table("kpis.csv", &t)?;
    let mut g = Table::new(ctx.meta("gains", "drl"), GAIN_HEADER);
    for (i, c) in report.per_seed.iter().enumerate() {
        g.push(vec![
            i.to_string(),
            c.seed.to_string(),
            num(c.thp_gain),
            num(c.jfi_gain),
            num(c.pdr_gain),
        ]);
    }
    let n = report.per_seed.len().max(1) as f64;
    let mean = |f: fn(&schedlab::a2c::SeedComparison) -> f64| report.per_seed.iter().map(f).sum::<f64>() / n;
    g.push(vec![
        "mean".into(),
        String::new(),
        num(mean(|c| c.thp_gain)),
        num(mean(|c| c.jfi_gain)),
        num(mean(|c| c.pdr_gain)),
    ]);
    ctx.out.write_table("gains.csv", &g)?;
    let mut r = Table::new(ctx.meta("rewards", "drl"), &["deployment", "seed", "drl_reward", "pf_reward"]);
    for (i, c) in report.per_seed.iter().enumerate() {
        r.push(vec![
            i.to_string(),
            c.seed.to_string(),
            num(c.candidate.mean_reward),
            num(c.pf.mean_reward),
        ]);
    }
    r.push(vec![
        "mean".into(),
        String::new(),
        num(mean(|c| c.candidate.mean_reward)),
        num(mean(|c| c.pf.mean_reward)),
    ]);
    ctx.out.write_table("rewards.csv", &r)
}

fn eval(ctx: &mut Ctx) -> Result<()> {
    let policy = Arc::clone(&ctx.policy.as_ref().expect("checked in run").0);
    let report = compare_policy(ctx, &policy)?;
    write_eval(ctx, &report)
}

fn train_mode(ctx: &mut Ctx) -> Result<()> {
    let section = ctx.cfg.a2c.as_ref().expect("checked by check_mode");
    let a2c = section.build(ctx.cfg.preference, derive_seed(ctx.master, 0, "a2c"));
    let TrainOutcome {
        policy,
        value,
        log,
        evals,
    } = train(&a2c, &ctx.scenario)?;
    ctx.out.write("policy.nn", &policy.to_bytes())?;
    ctx.out.write("value.nn", &value.to_bytes())?;

    // Rewards are per-TTI means over the iteration's whole batch.
    let mut lc = Table::new(
        ctx.meta("learning_curve", "drl"),
        &["iteration", "mean_reward", "pf_reward", "loss", "entropy", "value_loss", "lr"],
    );
    for l in &log {
        lc.push(vec![
            l.iteration.to_string(),
            num(l.mean_reward),
            num(l.pf_reward),
            num(l.loss),
            num(l.entropy),
            num(l.value_loss),
            num(l.lr),
        ]);
    }
    ctx.out.write_table("learning_curve.csv", &lc)?;
    let mut mon = Table::new(
        ctx.meta("monitor", "drl"),
        &["iteration", "drl_score", "pf_score", "drl_reward", "pf_reward"],
    );
    for e in &evals {
        mon.push(vec![
            e.iteration.to_string(),
            num(e.drl_score),
            num(e.pf_score),
            num(e.drl_reward),
            num(e.pf_reward),
        ]);
    }
    ctx.out.write_table("monitor.csv", &mon)?;

    let policy = Arc::new(policy);
    let report = compare_policy(ctx, &policy)?;
    write_eval(ctx, &report)
}

fn genie_problem(ctx: &Ctx, seed: u64) -> Result<GenieProblem> {
    let env = ctx.scenario.instantiate(seed)?;
    Ok(GenieProblem::from_env(&env, ctx.scenario.window as usize)?)
}

/// Short stable id of a genome.
pub fn genome_hash(genes: &[f64]) -> String {
    let bytes: Vec<u8> = genes.iter().flat_map(|g| g.to_le_bytes()).collect();
    sha256_hex(&bytes)[..16].to_string()
}

fn genie_ga(ctx: &mut Ctx) -> Result<()> {
    let section = ctx.cfg.ga.clone().expect("checked by check_mode");
    let k = ctx.scenario.base.num_ues;
    let mut pf_rows = Vec::new();
    let mut ga_rows = Vec::new();
    let mut front = Table::new(
        ctx.meta("front", "ga"),
        &["deployment", "seed", "genome_hash", "thp", "jfi", "pdr", "rank", "crowding"],
    );
    let mut hv = Table::new(ctx.meta("hypervolume", "ga"), &["deployment", "seed", "generation", "hypervolume"]);
    for (i, &seed) in ctx.seeds.iter().enumerate() {
        let problem = genie_problem(ctx, seed)?;
        let (pf_decisions, pf_kpis) = problem.replay_scheduler(&mut ProportionalFair);
        let mut seeds = Vec::new();
        if section.seed_baselines {
            seeds.push(encode_decisions(&pf_decisions));
            seeds.push(encode_decisions(&problem.replay_scheduler(&mut MaxCi).0));
            seeds.push(encode_decisions(&problem.replay_scheduler(&mut RoundRobin::new(k)).0));
        }
        let cfg = section.build(derive_seed(ctx.master, i as u64, "ga"));
        let GaOutcome {
            front: members,
            population,
            hypervolume,
        } = nsga2_run(&problem, &cfg, &seeds)?;
        let objs: Vec<Kpis> = members.iter().map(|m| m.objectives).collect();
        let pick = select_final(&objs, &ctx.cfg.preference).expect("front is nonempty");
        pf_rows.push(pf_kpis);
        ga_rows.push(objs[pick]);
        for m in &population {
            front.push(vec![
                i.to_string(),
                seed.to_string(),
                genome_hash(&m.genes),
                num(m.objectives.thp),
                num(m.objectives.jfi),
                num(m.objectives.pdr),
                m.rank.to_string(),
                num(m.crowding),
            ]);
        }
        for (g, v) in hypervolume.iter().enumerate() {
            hv.push(vec![i.to_string(), seed.to_string(), g.to_string(), num(*v)]);
        }
    }
    let t = ctx.kpi_table("ga", &[("ga".into(), ga_rows), ("pf".into(), pf_rows)]);
    ctx.out.write_table("kpis.csv", &t)?;
    ctx.out.write_table("front.csv", &front)?;
    ctx.out.write_table("hypervolume.csv", &hv)
}

/// `1-3-0-2`: 1-based UE per TTI, 0 for idle.
pub fn action_string(actions: &[Option<usize>]) -> String {
    actions
        .iter()
        .map(|a| a.map_or(0, |u| u + 1).to_string())
        .collect::<Vec<_>>()
        .join("-")
}

fn genie_pla(ctx: &mut Ctx) -> Result<()> {
    let section = ctx.cfg.pla.clone().expect("checked by check_mode");
    let cfg = PlaConfig {
        list_size: section.list_size,
        preference: ctx.cfg.preference,
    };
    let mut pf_rows = Vec::new();
    let mut pla_rows = Vec::new();
    let mut front = Table::new(
        ctx.meta("front", "pla"),
        &["deployment", "seed", "path_id", "actions", "thp", "jfi", "pdr", "rank"],
    );
    for (i, &seed) in ctx.seeds.iter().enumerate() {
        let problem = genie_problem(ctx, seed)?;
        let pf_kpis = problem.replay_scheduler(&mut ProportionalFair).1;
        let out: PlaOutcome = pla_run(&problem, &cfg)?;
        pf_rows.push(pf_kpis);
        pla_rows.push(out.selected_path().objectives);
        for (id, (p, r)) in out.paths.iter().zip(&out.ranks).enumerate() {
            front.push(vec![
                i.to_string(),
                seed.to_string(),
                id.to_string(),
                action_string(&p.actions),
                num(p.objectives.thp),
                num(p.objectives.jfi),
                num(p.objectives.pdr),
                r.to_string(),
            ]);
        }
    }
    let t = ctx.kpi_table("pla", &[("pla".into(), pla_rows), ("pf".into(), pf_rows)]);
    ctx.out.write_table("kpis.csv", &t)?;
    ctx.out.write_table("front.csv", &front)
}
