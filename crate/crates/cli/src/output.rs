//! CSV tables and the per-run directory.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::Value;

use crate::error::CliError;

/// Environment variable naming the output root.
pub const RUNS_DIR_ENV: &str = "COPOLYMER_RUNS_DIR";

pub fn runs_root() -> PathBuf {
    std::env::var_os(RUNS_DIR_ENV)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from("runs"))
}

/// 17 significant digits.
pub fn fmt_f(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else {
        format!("{x:.16e}")
    }
}

pub fn fmt_opt(x: Option<f64>) -> String {
    x.map_or_else(|| "nan".into(), fmt_f)
}

pub fn fmt_bool(b: bool) -> String {
    if b { "1" } else { "0" }.into()
}

#[derive(Debug, Clone)]
pub struct Table {
    pub name: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(name: &str, header: &[&str]) -> Table {
        Table {
            name: name.to_string(),
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len(), "{}", self.name);
        self.rows.push(row);
    }

    pub fn render(&self) -> String {
        let mut s = self.header.join(",");
        s.push('\n');
        for r in &self.rows {
            let _ = writeln!(s, "{}", r.join(","));
        }
        s
    }
}

#[derive(Debug, Serialize)]
pub struct PhaseTiming {
    pub phase: String,
    pub seconds: f64,
}

#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub run_id: String,
    pub command: String,
    pub version: &'static str,
    pub threads: usize,
    pub config: Value,
    pub timings: Vec<PhaseTiming>,
    pub outputs: Vec<String>,
}

fn write_atomic(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, path)
}

/// Writes every table and then the manifest into `root/<run_id>/`.
pub fn write_run(
    root: &Path,
    manifest: &RunManifest,
    tables: &[Table],
) -> Result<PathBuf, CliError> {
    let dir = root.join(&manifest.run_id);
    fs::create_dir_all(&dir)?;
    for t in tables {
        write_atomic(&dir.join(&t.name), t.render().as_bytes())?;
    }
    let json = serde_json::to_string_pretty(manifest).expect("manifest serializes");
    write_atomic(&dir.join("manifest.json"), json.as_bytes())?;
    Ok(dir)
}
