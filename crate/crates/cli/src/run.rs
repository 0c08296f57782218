//! Output directory bookkeeping and the run manifest.

use anyhow::Context;
use serde::Serialize;
use serde_json::{json, Map, Value};
use sha2::{Digest, Sha256};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

pub const MANIFEST: &str = "manifest.json";

/// One subcommand invocation: written files, summary values and seeds.
pub struct Run {
    subcommand: String,
    dir: PathBuf,
    config: Value,
    started: Instant,
    /// `(file name, sha256)` in write order.
    files: Vec<(String, String)>,
    pub seeds: Vec<u64>,
    /// Scalar results echoed to stdout and the manifest.
    pub summary: Map<String, Value>,
}

impl Run {
    pub fn new(subcommand: &str, dir: &Path, config: &impl Serialize) -> anyhow::Result<Self> {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        Ok(Self {
            subcommand: subcommand.to_string(),
            dir: dir.to_path_buf(),
            config: serde_json::to_value(config)?,
            started: Instant::now(),
            files: Vec::new(),
            seeds: Vec::new(),
            summary: Map::new(),
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn write(&mut self, name: &str, bytes: &[u8]) -> anyhow::Result<()> {
        let path = self.dir.join(name);
        std::fs::write(&path, bytes).with_context(|| format!("writing {}", path.display()))?;
        self.files.retain(|f| f.0 != name);
        self.files.push((name.to_string(), hex::encode(Sha256::digest(bytes))));
        Ok(())
    }

    /// Writes a CSV from a header and preformatted rows.
    pub fn csv(&mut self, name: &str, header: &str, rows: impl IntoIterator<Item = String>) -> anyhow::Result<()> {
        let mut s = String::with_capacity(1024);
        s.push_str(header);
        s.push('\n');
        for r in rows {
            s.push_str(&r);
            s.push('\n');
        }
        self.write(name, s.as_bytes())
    }

    pub fn note(&mut self, key: &str, value: impl Serialize) {
        let v = serde_json::to_value(value).unwrap_or(Value::Null);
        self.summary.insert(key.to_string(), v);
    }

    /// Writes `manifest.json`.
    pub fn finish(&self, exit_code: u8, error: Option<String>) -> anyhow::Result<()> {
        let mut combined = Sha256::new();
        let mut sorted: Vec<&(String, String)> = self.files.iter().collect();
        sorted.sort();
        for (name, hash) in &sorted {
            combined.update(name.as_bytes());
            combined.update([0]);
            combined.update(hash.as_bytes());
            combined.update(b"\n");
        }
        let outputs: Vec<Value> = self
            .files
            .iter()
            .map(|(n, h)| json!({ "file": n, "sha256": h }))
            .collect();
        let manifest = json!({
            "subcommand": self.subcommand,
            "config": self.config,
            "seeds": self.seeds,
            "version": env!("CARGO_PKG_VERSION"),
            "threads": rayon::current_num_threads(),
            "wall_time_s": self.started.elapsed().as_secs_f64(),
            "exit_code": exit_code,
            "error": error,
            "summary": self.summary,
            "outputs": outputs,
            "output_hash": hex::encode(combined.finalize()),
        });
        let text = serde_json::to_string_pretty(&manifest)?;
        let path = self.dir.join(MANIFEST);
        std::fs::write(&path, text + "\n").with_context(|| format!("writing {}", path.display()))
    }
}

/// Float with 17 significant digits.
pub fn f(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn row(fields: &[String]) -> String {
    let mut s = String::new();
    for (i, x) in fields.iter().enumerate() {
        if i > 0 {
            s.push(',');
        }
        let _ = write!(s, "{x}");
    }
    s
}
