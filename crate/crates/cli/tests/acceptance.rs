//! End-to-end acceptance suite. Prints one PASS/FAIL line per criterion and
//! exits nonzero if any fails.
//!
//! `ACCEPTANCE_ONLY=4,5` runs a subset.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use schedlab::a2c::{a2c_loss, a2c_objective, decide_multi_rbg, observe, step_reward, Experience, LossWeights, UpdateBatch};
use schedlab::genie::{
    dominates, exhaustive_search, fast_nondominated_sort, nsga2_run, pla_run, ActionSpace, GaConfig, GenieProblem,
    PlaConfig,
};
use schedlab::nn::{finite_diff_check, masked_softmax, sample_categorical, Mlp};
use schedlab::scenario::Scenario;
use schedlab::score::Preference;
use schedlab::sim::{jain_index, Decision, Env, Kpis, SimConfig};
use schedlab_cli::{rerun, run, ExperimentConfig, Mode, RunOptions};

type Outcome = Result<String, String>;
type Criterion = (u32, &'static str, fn() -> Outcome);

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn key(k: &Kpis) -> [u64; 3] {
    [k.thp.to_bits(), k.jfi.to_bits(), k.pdr.to_bits()]
}

// ---------------------------------------------------------------- 1, 2

fn fuzzed_config(rng: &mut ChaCha8Rng) -> SimConfig {
    let k = rng.random_range(1..=8);
    let b = rng.random_range(1..=4);
    let mut cfg = SimConfig::desk_scale(k, b);
    cfg.arrival_rate = rng.random_range(0.0..2.5);
    cfg.packet_size = rng.random_range(100..=8000);
    cfg.buffer_capacity = rng.random_range(1..=30);
    cfg.max_delay = rng.random_range(1..=80);
    cfg.mean_snr_per_ue = (0..k).map(|_| rng.random_range(-5.0..25.0)).collect();
    cfg.doppler_block_len = if rng.random_bool(0.3) { None } else { Some(rng.random_range(1..20)) };
    cfg.rng_seed = rng.random();
    cfg
}

fn random_decision(env: &Env, rng: &mut ChaCha8Rng) -> Decision {
    let k = env.num_ues();
    Decision {
        assignment: (0..env.num_rbgs())
            .map(|_| {
                let u = rng.random_range(0..=k);
                (u < k && env.is_active(u)).then_some(u)
            })
            .collect(),
    }
}

/// Returns (conservation violations, PDR range violations, TTIs stepped).
fn fuzz_run() -> (u64, u64, u64) {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let (mut bad, mut bad_pdr, mut ttis) = (0, 0, 0);
    for _ in 0..20 {
        let mut env = Env::new(fuzzed_config(&mut rng)).unwrap();
        let mut sched_rng = ChaCha8Rng::seed_from_u64(rng.random());
        for _ in 0..10_000 {
            let d = random_decision(&env, &mut sched_rng);
            env.step(&d).unwrap();
            ttis += 1;
            for buf in env.buffers() {
                if buf.arrived_total() != buf.sent_total() + buf.dropped_total() + buf.len() as u64 {
                    bad += 1;
                }
            }
            let pdr = env.window_kpis().pdr;
            if !(0.0..=1.0).contains(&pdr) {
                bad_pdr += 1;
            }
        }
    }
    (bad, bad_pdr, ttis)
}

fn criterion_1() -> Outcome {
    let (bad, _, ttis) = fuzz_run();
    check(bad == 0, format!("{bad} conservation violations over {ttis} TTIs in 20 fuzzed cells"))
}

fn criterion_2() -> Outcome {
    let examples = [
        (jain_index(&[7.0; 5]), 1.0),
        (jain_index(&[9.0, 0.0, 0.0, 0.0, 0.0]), 0.2),
        (jain_index(&[2.0, 1.0, 1.0]), 16.0 / 18.0),
    ];
    let worst = examples.iter().map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    let (_, bad_pdr, ttis) = fuzz_run();
    check(
        worst <= 1e-12 && bad_pdr == 0,
        format!("JFI max error {worst:.1e}; {bad_pdr} PDR values outside [0,1] over {ttis} TTIs"),
    )
}

// ---------------------------------------------------------------- 3

fn peel(objs: &[Kpis]) -> Vec<Vec<usize>> {
    let mut left: Vec<usize> = (0..objs.len()).collect();
    let mut fronts = Vec::new();
    while !left.is_empty() {
        let front: Vec<usize> =
            left.iter().copied().filter(|&i| !left.iter().any(|&j| dominates(&objs[j], &objs[i]))).collect();
        left.retain(|i| !front.contains(i));
        fronts.push(front);
    }
    fronts
}

fn criterion_3() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut mismatches = 0;
    for case in 0..1000 {
        let n = rng.random_range(0..=200);
        let levels = [2u32, 5, 20, 1_000_000][case % 4];
        let objs: Vec<Kpis> = (0..n)
            .map(|_| {
                let mut q = || rng.random_range(0..levels) as f64 / levels as f64;
                Kpis { thp: q(), jfi: q(), pdr: q() }
            })
            .collect();
        if fast_nondominated_sort(&objs) != peel(&objs) {
            mismatches += 1;
        }
    }
    check(mismatches == 0, format!("{mismatches}/1000 partitions differ from brute force"))
}

// ---------------------------------------------------------------- 4, 5

fn genie_problems(k: usize, n: usize, count: u64) -> Vec<GenieProblem> {
    let mut sc = Scenario::new(SimConfig::desk_scale(k, 1));
    sc.window = n as u32;
    (0..count)
        .map(|seed| GenieProblem::from_env(&sc.instantiate(1000 + seed).unwrap(), n).unwrap())
        .collect()
}

fn criterion_4() -> Outcome {
    let mut matched = 0;
    let cfg = PlaConfig { list_size: 243, preference: Preference::default() };
    for p in genie_problems(3, 5, 10) {
        let pla = pla_run(&p, &cfg).map_err(|e| e.to_string())?;
        let got: BTreeSet<[u64; 3]> = pla.front().map(|s| key(&s.objectives)).collect();
        let want: BTreeSet<[u64; 3]> = exhaustive_search(&p, ActionSpace::ActiveTree)
            .map_err(|e| e.to_string())?
            .iter()
            .map(|o| key(&o.objectives))
            .collect();
        matched += (got == want) as usize;
    }
    let cli = cli_pla_matches_oracle()?;
    check(
        matched == 10 && cli,
        format!("{matched}/10 traces match the exhaustive front; CLI front CSV matches oracle: {cli}"),
    )
}

fn criterion_5() -> Outcome {
    let mut covered_traces = 0;
    let mut monotone = true;
    let mut subset = true;
    let mut worst = 1.0f64;
    for (i, p) in genie_problems(2, 6, 10).iter().enumerate() {
        let truth: BTreeSet<[u64; 3]> = exhaustive_search(p, ActionSpace::Sequences)
            .map_err(|e| e.to_string())?
            .iter()
            .map(|o| key(&o.objectives))
            .collect();
        let cfg = GaConfig { population: 64, generations: 200, rng_seed: 50 + i as u64, ..GaConfig::default() };
        let out = nsga2_run(p, &cfg, &[]).map_err(|e| e.to_string())?;
        let found: BTreeSet<[u64; 3]> = out.front.iter().map(|m| key(&m.objectives)).collect();
        subset &= found.is_subset(&truth);
        let coverage = truth.intersection(&found).count() as f64 / truth.len() as f64;
        worst = worst.min(coverage);
        covered_traces += (coverage >= 0.9) as usize;
        monotone &= out.hypervolume.windows(2).all(|w| w[1] >= w[0]);
    }
    check(
        covered_traces >= 8 && monotone,
        format!(
            "{covered_traces}/10 traces with >= 90% coverage (worst {:.0}%); front within true set: {subset}; hypervolume monotone: {monotone}",
            worst * 100.0
        ),
    )
}

// ---------------------------------------------------------------- 6, 7

fn criterion_6() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut cfg = SimConfig::desk_scale(4, 1);
    cfg.arrival_rate = 0.08;
    cfg.rng_seed = 6;
    let mut env = Env::new(cfg).unwrap();
    let policy = Mlp::he_uniform(&[16, 32, 32, 4], &mut rng);
    let value = Mlp::he_uniform(&[16, 32, 32, 1], &mut rng);
    let pref = Preference::default();
    let mut experiences = Vec::new();
    while experiences.len() < 12 {
        let (state, _) = observe(&env);
        let (d, choices) = decide_multi_rbg(&policy, &env, Some(&mut rng));
        let rec = env.step(&d).unwrap();
        let reward = step_reward(&env, &rec, &pref);
        if !choices.is_empty() {
            experiences.push(Experience { state, choices, reward, next_state: observe(&env).0, done: false });
        }
    }
    let masked = experiences.iter().flat_map(|e| &e.choices).filter(|c| c.mask.iter().any(|m| !m)).count();
    let targets: Vec<f64> = (0..experiences.len()).map(|_| rng.random_range(0.0..3.0)).collect();
    let advantages: Vec<f64> = (0..experiences.len()).map(|_| rng.random_range(-1.0..1.0)).collect();
    let batch = UpdateBatch { experiences, targets };
    let w = LossWeights { entropy: 0.05, value: 0.5 };
    let obj = a2c_objective(&policy, &value, &batch, &advantages, w).map_err(|e| e.to_string())?;

    let analytic_p: Vec<f64> = (0..policy.num_params()).map(|i| obj.policy_grads.get(i)).collect();
    let idx_p: Vec<usize> = (0..policy.num_params()).collect();
    let ep = finite_diff_check(&analytic_p, &idx_p, 1e-4, |i, d| {
        let mut p = policy.clone();
        p.set_param(i, p.param(i) + d);
        a2c_loss(&p, &value, &batch, &advantages, w)
    });
    let analytic_v: Vec<f64> = (0..value.num_params()).map(|i| obj.value_grads.get(i)).collect();
    let idx_v: Vec<usize> = (0..value.num_params()).collect();
    let ev = finite_diff_check(&analytic_v, &idx_v, 1e-4, |i, d| {
        let mut q = value.clone();
        q.set_param(i, q.param(i) + d);
        a2c_loss(&policy, &q, &batch, &advantages, w)
    });
    let worst = ep.max(ev);
    check(
        worst < 1e-4 && masked > 0,
        format!("max relative error {worst:.2e} over all parameters; {masked} policy rows with masked UEs"),
    )
}

fn criterion_7() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let (mut hits, mut leak) = (0u64, 0.0f64);
    let k = 8;
    for _ in 0..1_000_000 {
        let mut mask: Vec<bool> = (0..k).map(|_| rng.random_bool(0.5)).collect();
        if !mask.iter().any(|&m| m) {
            let j = rng.random_range(0..k);
            mask[j] = true;
        }
        // Masked entries get the largest logits to make leaks likely.
        let logits: Vec<f64> =
            mask.iter().map(|&m| if m { rng.random_range(-30.0..30.0) } else { rng.random_range(30.0..60.0) }).collect();
        let p = masked_softmax(&logits, &mask).map_err(|e| e.to_string())?;
        for (pi, m) in p.iter().zip(&mask) {
            if !m {
                leak = leak.max(*pi);
            }
        }
        if !mask[sample_categorical(&p, &mut rng)] {
            hits += 1;
        }
    }
    check(
        hits == 0 && leak < 1e-12,
        format!("{hits} masked actions in 1e6 draws; largest masked probability {leak:e}"),
    )
}

// ---------------------------------------------------------------- CLI helpers

fn scratch_root() -> PathBuf {
    std::env::temp_dir().join(format!("schedlab-acceptance-{}", std::process::id()))
}

/// A fresh, empty directory for one run.
fn scratch(name: &str) -> PathBuf {
    let dir = scratch_root().join(name);
    let _ = fs::remove_dir_all(&dir);
    dir
}

fn config(text: &str) -> ExperimentConfig {
    ExperimentConfig::from_toml_str(text).expect("acceptance configs are valid")
}

/// Rows of a result CSV, keyed by header name.
fn read_rows(path: &Path) -> Vec<BTreeMap<String, String>> {
    let mut r = csv::ReaderBuilder::new().comment(Some(b'#')).from_path(path).unwrap();
    let headers = r.headers().unwrap().clone();
    r.records()
        .map(|rec| headers.iter().map(String::from).zip(rec.unwrap().iter().map(String::from)).collect())
        .collect()
}

fn f(row: &BTreeMap<String, String>, col: &str) -> f64 {
    row[col].parse().unwrap()
}

fn per_method(rows: &[BTreeMap<String, String>], method: &str, col: &str) -> Vec<f64> {
    rows.iter().filter(|r| r["method"] == method && r["deployment"] != "mean").map(|r| f(r, col)).collect()
}

fn mean_of(rows: &[BTreeMap<String, String>], method: &str, col: &str) -> f64 {
    let r = rows.iter().find(|r| r["method"] == method && r["deployment"] == "mean").expect("mean row");
    f(r, col)
}

fn cli_pla_matches_oracle() -> Result<bool, String> {
    let out = scratch("pla-k3");
    let cfg = config(
        "[sim]\nnum_ues = 3\nnum_rbgs = 1\n[scenario]\nnum_deployments = 4\nwindow = 5\nmaster_seed = 11\n[pla]\nlist_size = 300\n",
    );
    let m = run(cfg.clone(), Mode::GeniePla, &RunOptions { out: Some(out.clone()), ..Default::default() })
        .map_err(|e| format!("{e:#}"))?;
    let rows = read_rows(&out.join("front.csv"));
    let sc = cfg.scenario(None).unwrap();
    let mut all = true;
    for (i, &seed) in m.deployment_seeds.iter().enumerate() {
        let got: BTreeSet<[u64; 3]> = rows
            .iter()
            .filter(|r| r["deployment"] == i.to_string() && r["rank"] == "0")
            .map(|r| key(&Kpis { thp: f(r, "thp"), jfi: f(r, "jfi"), pdr: f(r, "pdr") }))
            .collect();
        let p = GenieProblem::from_env(&sc.instantiate(seed).unwrap(), 5).unwrap();
        let want: BTreeSet<[u64; 3]> = exhaustive_search(&p, ActionSpace::ActiveTree)
            .unwrap()
            .iter()
            .map(|o| key(&o.objectives))
            .collect();
        all &= got == want;
    }
    Ok(all)
}

// ---------------------------------------------------------------- 8, 10

const TRAIN_CONFIG: &str = "\
[sim]
num_ues = 5
num_rbgs = 1

[scenario]
num_deployments = 20
window = 500
warmup = 100
master_seed = 8

[preference]
alpha = 1.0
beta = 1.0
delta = 1.0

[a2c]
gamma = 0.995
n_steps = 16
num_envs = 8
lr = 0.003
iterations = 1000000
lr_decay_at = 900000
hidden = [64, 64]
eval_every = 20000
eval_seeds = 4
";

fn trained_dir() -> PathBuf {
    scratch_root().join("train-k5")
}

fn criterion_8() -> Outcome {
    let out = trained_dir();
    let _ = fs::remove_dir_all(&out);
    let cfg = config(TRAIN_CONFIG);
    let iterations = cfg.a2c.as_ref().unwrap().iterations;
    run(cfg, Mode::Train, &RunOptions { out: Some(out.clone()), ..Default::default() }).map_err(|e| format!("{e:#}"))?;
    let kpis = read_rows(&out.join("kpis.csv"));
    let rewards = read_rows(&out.join("rewards.csv"));
    let drl = per_method(&kpis, "drl", "score");
    let pf = per_method(&kpis, "pf", "score");
    let wins = drl.iter().zip(&pf).filter(|(d, p)| *d >= &(0.98 * *p)).count();
    let mean = rewards.iter().find(|r| r["deployment"] == "mean").unwrap();
    let (dr, pr) = (f(mean, "drl_reward"), f(mean, "pf_reward"));
    check(
        dr >= pr && wins * 4 >= drl.len() * 3,
        format!(
            "{iterations} iterations; mean reward {dr:.4} vs PF {pr:.4}; score >= 0.98 x PF on {wins}/{} seeds (mean score {:.4} vs {:.4})",
            drl.len(),
            mean_of(&kpis, "drl", "score"),
            mean_of(&kpis, "pf", "score"),
        ),
    )
}

fn criterion_10() -> Outcome {
    let trained = trained_dir();
    let checkpoint = trained.join("policy.nn");
    if !checkpoint.exists() {
        return Err("no trained policy (criterion 8 did not run)".into());
    }
    let out = scratch("transfer-b10");
    let opts = RunOptions { checkpoint: Some(checkpoint), transfer_rbgs: Some(10), out: Some(out.clone()), ..Default::default() };
    run(config(TRAIN_CONFIG), Mode::Eval, &opts).map_err(|e| format!("{e:#}"))?;
    let kpis = read_rows(&out.join("kpis.csv"));
    let (d, p) = (mean_of(&kpis, "drl", "score"), mean_of(&kpis, "pf", "score"));
    check(d >= 0.9 * p, format!("B=10 mean score {d:.4} vs PF {p:.4} (ratio {:.3})", d / p))
}

// ---------------------------------------------------------------- 9

fn best_weighted(front: &[BTreeMap<String, String>], deployment: usize, pref: &Preference, thp_ref: f64) -> f64 {
    front
        .iter()
        .filter(|r| r["deployment"] == deployment.to_string() && r["rank"] == "0")
        .map(|r| pref.score(&Kpis { thp: f(r, "thp"), jfi: f(r, "jfi"), pdr: f(r, "pdr") }, thp_ref))
        .fold(f64::NEG_INFINITY, f64::max)
}

fn criterion_9() -> Outcome {
    let base = "[sim]\nnum_ues = 5\nnum_rbgs = 1\n[scenario]\nnum_deployments = 10\nwindow = 100\nmaster_seed = 9\n";
    let mut detail = Vec::new();
    let mut ok = true;
    for (mode, section, name) in [(Mode::GenieGa, "[ga]\n", "ga"), (Mode::GeniePla, "[pla]\n", "pla")] {
        let out = scratch(name);
        let cfg = config(&format!("{base}{section}"));
        let thp_ref = schedlab::score::max_throughput(&cfg.scenario(None).unwrap().base);
        run(cfg.clone(), mode, &RunOptions { out: Some(out.clone()), ..Default::default() })
            .map_err(|e| format!("{e:#}"))?;
        let front = read_rows(&out.join("front.csv"));
        let pf = per_method(&read_rows(&out.join("kpis.csv")), "pf", "score");
        let beats = (0..pf.len()).filter(|&i| best_weighted(&front, i, &cfg.preference, thp_ref) >= pf[i]).count();
        ok &= beats == pf.len();
        detail.push(format!("{name} best member >= PF replay on {beats}/{}", pf.len()));
    }
    check(ok, detail.join("; "))
}

// ---------------------------------------------------------------- 11

fn same_csvs(a: &Path, b: &Path) -> Result<usize, String> {
    let mut n = 0;
    for entry in fs::read_dir(a).map_err(|e| e.to_string())? {
        let p = entry.map_err(|e| e.to_string())?.path();
        let name = p.file_name().unwrap().to_owned();
        if p.extension().is_some_and(|e| e == "csv" || e == "nn") {
            let other = b.join(&name);
            if fs::read(&p).ok() != fs::read(&other).ok() {
                return Err(format!("{} differs", name.to_string_lossy()));
            }
            n += 1;
        }
    }
    Ok(n)
}

fn criterion_11() -> Outcome {
    let base = "[sim]\nnum_ues = 3\nnum_rbgs = 2\n[scenario]\nnum_deployments = 3\nwindow = 40\nwarmup = 20\nmaster_seed = 5\n";
    let b1 = "[sim]\nnum_ues = 3\nnum_rbgs = 1\n[scenario]\nnum_deployments = 3\nwindow = 8\nwarmup = 20\nmaster_seed = 5\n";
    let a2c = "[a2c]\niterations = 30\nhidden = [32, 32]\neval_every = 10\neval_seeds = 2\nnum_envs = 3\n";
    let train_dir = scratch("det-train");
    let checkpoint = train_dir.join("policy.nn");
    let runs: Vec<(&str, Mode, String, RunOptions)> = vec![
        ("baseline", Mode::Baseline, base.to_string(), RunOptions::default()),
        ("train", Mode::Train, format!("{base}{a2c}"), RunOptions { out: Some(train_dir.clone()), ..Default::default() }),
        ("eval", Mode::Eval, format!("{base}{a2c}"), RunOptions { checkpoint: Some(checkpoint.clone()), ..Default::default() }),
        (
            "transfer",
            Mode::Eval,
            format!("{base}{a2c}"),
            RunOptions { checkpoint: Some(checkpoint), transfer_rbgs: Some(4), ..Default::default() },
        ),
        ("genie-ga", Mode::GenieGa, format!("{b1}[ga]\npopulation = 16\ngenerations = 10\nseed_baselines = true\n"), RunOptions::default()),
        ("genie-pla", Mode::GeniePla, format!("{b1}[pla]\nlist_size = 50\n"), RunOptions::default()),
    ];
    let mut files = 0;
    for (name, mode, text, mut opts) in runs {
        let first = opts.out.clone().unwrap_or_else(|| scratch(&format!("det-{name}")));
        opts.out = Some(first.clone());
        run(config(&text), mode, &opts).map_err(|e| format!("{name}: {e:#}"))?;
        let second = scratch(&format!("det-{name}-again"));
        rerun(&first.join("manifest.json"), Some(second.clone())).map_err(|e| format!("{name}: {e:#}"))?;
        files += same_csvs(&first, &second).map_err(|e| format!("{name}: {e}"))?;
        if name == "baseline" {
            let rows = read_rows(&first.join("kpis.csv"));
            if rows.len() != 4 {
                return Err(format!("baseline wrote {} rows, expected 3 + mean", rows.len()));
            }
        }
    }
    Ok(format!("6 runs repeated from their manifests; {files} result files byte-identical"))
}

// ----------------------------------------------------------------

fn main() -> ExitCode {
    let criteria: [Criterion; 11] = [
        (1, "conservation under fuzz", criterion_1),
        (2, "KPI correctness", criterion_2),
        (3, "nondominated sort vs brute force", criterion_3),
        (4, "PLA exactness at saturation", criterion_4),
        (5, "NSGA-II recovers the exhaustive front", criterion_5),
        (6, "A2C gradient fidelity", criterion_6),
        (7, "action masking", criterion_7),
        (8, "trained policy vs PF", criterion_8),
        (9, "genie fronts beat PF replay", criterion_9),
        (10, "single-RBG policy on 10 RBGs", criterion_10),
        (11, "determinism from manifests", criterion_11),
    ];
    let only: Option<BTreeSet<u32>> = std::env::var("ACCEPTANCE_ONLY")
        .ok()
        .map(|s| s.split(',').filter_map(|x| x.trim().parse().ok()).collect());
    let mut failed = 0;
    for (id, name, f) in criteria {
        if only.as_ref().is_some_and(|o| !o.contains(&id)) {
            continue;
        }
        let t = Instant::now();
        let result = std::panic::catch_unwind(f).unwrap_or_else(|_| Err("panicked".into()));
        let secs = t.elapsed().as_secs_f64();
        match result {
            Ok(d) => println!("PASS  [{id:>2}] {name}: {d} ({secs:.1} s)"),
            Err(d) => {
                failed += 1;
                println!("FAIL  [{id:>2}] {name}: {d} ({secs:.1} s)");
            }
        }
    }
    let _ = fs::remove_dir_all(scratch_root());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} criteria failed");
        ExitCode::FAILURE
    }
}
