//! Result files. Every CSV starts with one comment line
//! `# schedlab-result v1 kind=<kind> method=<method> sim_hash=<hash> pref=<a>:<b>:<d> thp_ref=<bps>`
//! followed by a header row.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use schedlab::score::Preference;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub const SCHEMA: &str = "schedlab-result v1";

/// Metadata carried by the comment line of a result CSV.
#[derive(Clone, Debug, PartialEq)]
pub struct CsvMeta {
    pub kind: String,
    pub method: String,
    pub sim_hash: String,
    pub pref: Preference,
    /// Throughput that scores are normalized by, bits/s.
    pub thp_ref: f64,
}

impl CsvMeta {
    pub fn line(&self) -> String {
        let p = &self.pref;
        format!(
            "# {SCHEMA} kind={} method={} sim_hash={} pref={}:{}:{} thp_ref={}\n",
            self.kind, self.method, self.sim_hash, p.alpha, p.beta, p.delta, self.thp_ref
        )
    }

    pub fn parse(line: &str) -> Option<Self> {
        let rest = line.strip_prefix("# ")?.strip_prefix(SCHEMA)?;
        let mut fields: BTreeMap<&str, &str> = BTreeMap::new();
        for kv in rest.split_whitespace() {
            let (k, v) = kv.split_once('=')?;
            fields.insert(k, v);
        }
        let mut w = fields.get("pref")?.split(':').map(|x| x.parse::<f64>());
        let pref = Preference {
            alpha: w.next()?.ok()?,
            beta: w.next()?.ok()?,
            delta: w.next()?.ok()?,
        };
        Some(Self {
            kind: fields.get("kind")?.to_string(),
            method: fields.get("method")?.to_string(),
            sim_hash: fields.get("sim_hash")?.to_string(),
            pref,
            thp_ref: fields.get("thp_ref")?.parse().ok()?,
        })
    }
}

/// A CSV table built in memory and written in one go.
pub struct Table {
    meta: CsvMeta,
    header: Vec<&'static str>,
    rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(meta: CsvMeta, header: &[&'static str]) -> Self {
        Self {
            meta,
            header: header.to_vec(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut out = self.meta.line().into_bytes();
        let mut w = csv::Writer::from_writer(&mut out);
        w.write_record(&self.header)?;
        for r in &self.rows {
            w.write_record(r)?;
        }
        w.flush()?;
        drop(w);
        Ok(out)
    }
}

pub fn num(x: f64) -> String {
    format!("{x}")
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Artifact {
    pub file: String,
    pub sha256: String,
}

/// Collects the files of one run and writes them under `dir`.
pub struct OutputDir {
    dir: PathBuf,
    artifacts: Vec<Artifact>,
}

impl OutputDir {
    pub fn create(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            artifacts: Vec::new(),
        })
    }

    pub fn path(&self, file: &str) -> PathBuf {
        self.dir.join(file)
    }

    pub fn write(&mut self, file: &str, bytes: &[u8]) -> Result<()> {
        let p = self.path(file);
        fs::write(&p, bytes).with_context(|| format!("writing {}", p.display()))?;
        self.artifacts.push(Artifact {
            file: file.to_string(),
            sha256: sha256_hex(bytes),
        });
        Ok(())
    }

    pub fn write_table(&mut self, file: &str, table: &Table) -> Result<()> {
        self.write(file, &table.to_bytes()?)
    }

    pub fn artifacts(&self) -> &[Artifact] {
        &self.artifacts
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn meta_round_trip() {
        let m = CsvMeta {
            kind: "kpis".into(),
            method: "pf".into(),
            sim_hash: "00ff".into(),
            pref: Preference {
                alpha: 1.0,
                beta: 0.5,
                delta: 2.0,
            },
            thp_ref: 5.5e6,
        };
        assert_eq!(CsvMeta::parse(m.line().trim_end()), Some(m));
        assert_eq!(CsvMeta::parse("# something else"), None);
    }

    #[test]
    fn table_bytes() {
        let meta = CsvMeta {
            kind: "kpis".into(),
            method: "pf".into(),
            sim_hash: "1".into(),
            pref: Preference::default(),
            thp_ref: 2.0,
        };
        let mut t = Table::new(meta, &["a", "b"]);
        t.push(vec!["1".into(), num(0.5)]);
        let text = String::from_utf8(t.to_bytes().unwrap()).unwrap();
        assert_eq!(
            text,
            "# schedlab-result v1 kind=kpis method=pf sim_hash=1 pref=1:1:1 thp_ref=2\na,b\n1,0.5\n"
        );
    }
}
