//! Combine result CSVs of one setup into a table of means and ratios to PF.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};
use schedlab::genie::select_final;
use schedlab::sim::Kpis;

use crate::output::{num, CsvMeta, Table};

pub const COMPARE_HEADER: &[&str] = &[
    "method",
    "deployments",
    "thp",
    "jfi",
    "pdr",
    "score",
    "thp_ratio",
    "jfi_ratio",
    "pdr_ratio",
    "score_ratio",
];

#[derive(Clone, Debug, PartialEq)]
pub struct MethodSummary {
    pub method: String,
    pub deployments: usize,
    pub mean: Kpis,
    pub score: f64,
    /// Mean over mean PF; 1.0 when equal.
    pub ratio: [f64; 4],
}

#[derive(Clone, Debug, PartialEq)]
pub struct Comparison {
    pub meta: CsvMeta,
    pub methods: Vec<MethodSummary>,
}

struct Loaded {
    meta: CsvMeta,
    /// method -> deployment -> KPIs
    rows: BTreeMap<String, BTreeMap<u64, Kpis>>,
}

fn field<'a>(rec: &'a csv::StringRecord, headers: &csv::StringRecord, name: &str) -> Result<&'a str> {
    let i = headers
        .iter()
        .position(|h| h == name)
        .ok_or_else(|| anyhow!("missing column `{name}`"))?;
    rec.get(i).ok_or_else(|| anyhow!("short row"))
}

fn kpis_of(rec: &csv::StringRecord, headers: &csv::StringRecord) -> Result<Kpis> {
    Ok(Kpis {
        thp: field(rec, headers, "thp")?.parse()?,
        jfi: field(rec, headers, "jfi")?.parse()?,
        pdr: field(rec, headers, "pdr")?.parse()?,
    })
}

fn load(path: &Path) -> Result<Loaded> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let first = text.lines().next().unwrap_or_default();
    let meta = CsvMeta::parse(first).ok_or_else(|| anyhow!("{}: not a schedlab result CSV", path.display()))?;
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_reader(text.as_bytes());
    let headers = reader.headers()?.clone();
    let mut rows: BTreeMap<String, BTreeMap<u64, Kpis>> = BTreeMap::new();
    match meta.kind.as_str() {
        "kpis" => {
            for rec in reader.records() {
                let rec = rec?;
                let dep = field(&rec, &headers, "deployment")?;
                if dep == "mean" {
                    continue;
                }
                let method = field(&rec, &headers, "method")?.to_string();
                rows.entry(method).or_default().insert(dep.parse()?, kpis_of(&rec, &headers)?);
            }
        }
        "front" => {
            // Reduce each deployment's front to its preferred member.
            let mut fronts: BTreeMap<u64, Vec<Kpis>> = BTreeMap::new();
            for rec in reader.records() {
                let rec = rec?;
                if field(&rec, &headers, "rank")? != "0" {
                    continue;
                }
                let dep = field(&rec, &headers, "deployment")?.parse()?;
                fronts.entry(dep).or_default().push(kpis_of(&rec, &headers)?);
            }
            let picked = rows.entry(meta.method.clone()).or_default();
            for (dep, f) in fronts {
                let i = select_final(&f, &meta.pref).expect("fronts are nonempty");
                picked.insert(dep, f[i]);
            }
        }
        other => bail!("{}: cannot compare `{other}` results", path.display()),
    }
    Ok(Loaded { meta, rows })
}

fn ratio(a: f64, b: f64) -> f64 {
    if a == b {
        1.0
    } else {
        a / b
    }
}

/// All inputs must come from the same setup and include PF rows.
pub fn compare(paths: &[&Path]) -> Result<Comparison> {
    let mut meta: Option<CsvMeta> = None;
    let mut all: BTreeMap<String, BTreeMap<u64, Kpis>> = BTreeMap::new();
    let mut order: Vec<String> = Vec::new();
    for p in paths {
        let l = load(p)?;
        if let Some(m) = &meta {
            if m.sim_hash != l.meta.sim_hash {
                bail!(
                    "{}: sim_hash {} does not match {}",
                    p.display(),
                    l.meta.sim_hash,
                    m.sim_hash
                );
            }
            if m.pref != l.meta.pref || m.thp_ref != l.meta.thp_ref {
                bail!("{}: scored with a different preference", p.display());
            }
        } else {
            meta = Some(l.meta.clone());
        }
        for (method, deps) in l.rows {
            let known = all.contains_key(&method);
            let into = all.entry(method.clone()).or_default();
            for (d, k) in deps {
                if let Some(prev) = into.insert(d, k) {
                    if prev != k {
                        bail!("{}: conflicting `{method}` rows for deployment {d}", p.display());
                    }
                }
            }
            if !known {
                order.push(method);
            }
        }
    }
    let meta = meta.ok_or_else(|| anyhow!("no inputs"))?;
    let pf = all.get("pf").ok_or_else(|| anyhow!("inputs contain no pf rows"))?;
    let summarize = |deps: &BTreeMap<u64, Kpis>| {
        let n = deps.len() as f64;
        let mean = Kpis {
            thp: deps.values().map(|k| k.thp).sum::<f64>() / n,
            jfi: deps.values().map(|k| k.jfi).sum::<f64>() / n,
            pdr: deps.values().map(|k| k.pdr).sum::<f64>() / n,
        };
        let score = deps.values().map(|k| meta.pref.score(k, meta.thp_ref)).sum::<f64>() / n;
        (mean, score)
    };
    let (pf_mean, pf_score) = summarize(pf);
    let mut methods = Vec::new();
    for method in order {
        let deps = &all[&method];
        if !deps.keys().eq(pf.keys()) {
            bail!("`{method}` does not cover the same deployments as pf");
        }
        let (mean, score) = summarize(deps);
        methods.push(MethodSummary {
            deployments: deps.len(),
            ratio: [
                ratio(mean.thp, pf_mean.thp),
                ratio(mean.jfi, pf_mean.jfi),
                ratio(mean.pdr, pf_mean.pdr),
                ratio(score, pf_score),
            ],
            method,
            mean,
            score,
        });
    }
    Ok(Comparison { meta, methods })
}

impl Comparison {
    pub fn table(&self) -> Table {
        let meta = CsvMeta {
            kind: "compare".into(),
            method: "all".into(),
            ..self.meta.clone()
        };
        let mut t = Table::new(meta, COMPARE_HEADER);
        for m in &self.methods {
            let mut row = vec![
                m.method.clone(),
                m.deployments.to_string(),
                num(m.mean.thp),
                num(m.mean.jfi),
                num(m.mean.pdr),
                num(m.score),
            ];
            row.extend(m.ratio.iter().map(|&r| num(r)));
            t.push(row);
        }
        t
    }
}
