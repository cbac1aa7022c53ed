//! Machine-readable run summary: every command declares its inputs (with
//! content hashes), outputs and notices in one JSON file.
//!
//! Paths in the summary are stored relative to the manifest directory
//! (inputs) and the output directory (outputs), so identical runs into
//! different directories produce identical bytes.

use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::RunConfig;

pub const SUMMARY_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Serialize)]
pub struct InputRecord {
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Serialize)]
pub struct RunSummary {
    pub schema_version: u32,
    pub command: String,
    pub seed: u64,
    pub config: RunConfig,
    pub inputs: Vec<InputRecord>,
    pub outputs: Vec<String>,
    pub notices: Vec<String>,
}

impl RunSummary {
    pub fn new(command: &str, config: &RunConfig) -> RunSummary {
        RunSummary {
            schema_version: SUMMARY_SCHEMA_VERSION,
            command: command.to_string(),
            seed: config.seed,
            config: config.sanitized(),
            inputs: Vec::new(),
            outputs: Vec::new(),
            notices: Vec::new(),
        }
    }

    /// Hashes and records an input file. `base` strips the machine-local
    /// prefix from the stored path.
    pub fn add_input(&mut self, path: &Path, base: &Path) -> Result<()> {
        let bytes = std::fs::read(path)
            .with_context(|| format!("hashing input {}", path.display()))?;
        let digest = Sha256::digest(&bytes);
        let rel = path.strip_prefix(base).unwrap_or(path);
        self.inputs.push(InputRecord {
            path: rel.display().to_string(),
            sha256: hex_string(&digest),
        });
        Ok(())
    }

    pub fn add_output(&mut self, rel: impl Into<String>) {
        self.outputs.push(rel.into());
    }

    pub fn add_notice(&mut self, notice: impl Into<String>) {
        self.notices.push(notice.into());
    }

    pub fn write(mut self, out_dir: &Path) -> Result<PathBuf> {
        self.outputs.push("run_summary.json".into());
        self.outputs.sort();
        let path = out_dir.join("run_summary.json");
        let text = serde_json::to_string_pretty(&self).expect("summary serializes");
        std::fs::write(&path, text + "\n")
            .with_context(|| format!("writing {}", path.display()))?;
        Ok(path)
    }
}

fn hex_string(bytes: &[u8]) -> String {
    let mut s = String::with_capacity(bytes.len() * 2);
    for b in bytes {
        s.push_str(&format!("{b:02x}"));
    }
    s
}

/// Writes a CSV-like text file and registers it on the summary.
pub fn write_output(
    summary: &mut RunSummary,
    out_dir: &Path,
    name: &str,
    content: &str,
) -> Result<()> {
    let path = out_dir.join(name);
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)
            .with_context(|| format!("creating {}", parent.display()))?;
    }
    std::fs::write(&path, content).with_context(|| format!("writing {}", path.display()))?;
    summary.add_output(name);
    Ok(())
}

/// Renders a float for CSV output; absent values become empty fields.
pub fn fmt_opt(v: Option<f64>) -> String {
    match v {
        Some(x) if x.is_finite() => format!("{x:.6}"),
        Some(x) if x.is_infinite() && x > 0.0 => "inf".into(),
        Some(x) if x.is_infinite() => "-inf".into(),
        _ => String::new(),
    }
}

pub fn fmt(v: f64) -> String {
    fmt_opt(Some(v))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn summary_paths_are_relative_and_sorted() {
        let dir = tempfile::tempdir().unwrap();
        let data = dir.path().join("data");
        std::fs::create_dir_all(&data).unwrap();
        let f = data.join("x.csv");
        std::fs::write(&f, "a,b\n1,2\n").unwrap();

        let config = RunConfig::default();
        let mut s = RunSummary::new("metrics", &config);
        s.add_input(&f, &data).unwrap();
        s.add_output("z.csv");
        s.add_output("a.csv");
        let out = dir.path().join("out");
        std::fs::create_dir_all(&out).unwrap();
        let path = s.write(&out).unwrap();
        let text = std::fs::read_to_string(path).unwrap();
        let parsed: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert_eq!(parsed["inputs"][0]["path"], "x.csv");
        assert_eq!(parsed["inputs"][0]["sha256"].as_str().unwrap().len(), 64);
        let outputs: Vec<&str> = parsed["outputs"]
            .as_array()
            .unwrap()
            .iter()
            .map(|v| v.as_str().unwrap())
            .collect();
        assert_eq!(outputs, vec!["a.csv", "run_summary.json", "z.csv"]);
        assert!(parsed["config"]["manifest"].is_null());
    }

    #[test]
    fn float_formatting() {
        assert_eq!(fmt(1.25), "1.250000");
        assert_eq!(fmt_opt(None), "");
        assert_eq!(fmt_opt(Some(f64::INFINITY)), "inf");
        assert_eq!(fmt_opt(Some(f64::NAN)), "");
    }
}
