use serde_json::{json, Value};
use sha2::{Digest, Sha256};
use ssdss::io::{read_file, Document, Meta};
use ssdss::types::hz_to_rad;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{usage, CliError, CliResult};

/// `f0:f1` in Hz.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Band {
    pub f0: f64,
    pub f1: f64,
}

impl Band {
    /// Log-spaced grid across the band, rad/s.
    pub fn grid(&self, points: usize) -> CliResult<Vec<f64>> {
        if points < 2 {
            return Err(usage("--points must be at least 2"));
        }
        Ok(ssdss::frf::log_grid(hz_to_rad(self.f0), hz_to_rad(self.f1), points))
    }
}

fn parse_numbers(s: &str, n: usize, what: &str) -> Result<Vec<f64>, String> {
    let parts: Vec<&str> = s.split(':').collect();
    if parts.len() != n {
        return Err(format!("expected {what}, got '{s}'"));
    }
    parts.iter().map(|p| p.trim().parse::<f64>().map_err(|e| format!("'{p}': {e}"))).collect()
}

impl FromStr for Band {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let v = parse_numbers(s, 2, "f0:f1")?;
        if !(v[0] > 0.0 && v[1] > v[0] && v[1].is_finite()) {
            return Err(format!("band needs 0 < f0 < f1, got '{s}'"));
        }
        Ok(Band { f0: v[0], f1: v[1] })
    }
}

/// `f0:f1:duration` in Hz and s.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Sweep {
    pub f0: f64,
    pub f1: f64,
    pub duration: f64,
}

impl FromStr for Sweep {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let v = parse_numbers(s, 3, "f0:f1:duration")?;
        Ok(Sweep { f0: v[0], f1: v[1], duration: v[2] })
    }
}

/// Comma-separated indices and inclusive ranges: `0,2,6-11`.
#[derive(Clone, Debug, PartialEq)]
pub struct IndexList(pub Vec<usize>);

impl FromStr for IndexList {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let mut out = Vec::new();
        for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            let num = |t: &str| t.trim().parse::<usize>().map_err(|e| format!("'{t}': {e}"));
            match part.split_once('-') {
                Some((a, b)) => {
                    let (a, b) = (num(a)?, num(b)?);
                    if b < a {
                        return Err(format!("empty range '{part}'"));
                    }
                    out.extend(a..=b);
                }
                None => out.push(num(part)?),
            }
        }
        if out.is_empty() {
            return Err("no indices given".into());
        }
        Ok(IndexList(out))
    }
}

/// Hex SHA-256 of a file's bytes.
pub fn sha256_file(path: &Path) -> CliResult<String> {
    let bytes = std::fs::read(path).map_err(|e| usage(format!("{}: {e}", path.display())))?;
    Ok(format!("{:x}", Sha256::digest(&bytes)))
}

/// Reads a document and records its path and hash for provenance.
pub struct Inputs {
    entries: Vec<Value>,
}

impl Inputs {
    pub fn new() -> Self {
        Self { entries: Vec::new() }
    }

    pub fn read<T: Document>(&mut self, path: &Path) -> CliResult<T> {
        let hash = sha256_file(path)?;
        let (value, _) = read_file::<T>(path)?;
        self.entries.push(json!({ "path": path.display().to_string(), "sha256": hash }));
        Ok(value)
    }

    /// Output metadata: command name, input hashes and any extra fields.
    pub fn meta(&self, command: &str, extra: impl IntoIterator<Item = (&'static str, Value)>) -> Meta {
        let mut meta = Meta::new();
        meta.insert("tool".into(), json!(format!("ssdss {}", env!("CARGO_PKG_VERSION"))));
        meta.insert("command".into(), json!(command));
        meta.insert("inputs".into(), Value::Array(self.entries.clone()));
        for (k, v) in extra {
            meta.insert(k.into(), v);
        }
        meta
    }
}

/// `out.json` → `out.<suffix>`.
pub fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "out".into());
    path.with_file_name(format!("{stem}.{suffix}"))
}

/// Kind field of an ssdss-v1 document, read without parsing the body.
pub fn document_kind(path: &Path) -> CliResult<String> {
    let text = std::fs::read_to_string(path).map_err(|e| usage(format!("{}: {e}", path.display())))?;
    let v: Value = serde_json::from_str(&text)
        .map_err(|e| CliError::Lib(ssdss::Error::Schema(format!("{}: {e}", path.display()))))?;
    v.get("kind")
        .and_then(Value::as_str)
        .map(str::to_string)
        .ok_or_else(|| CliError::Lib(ssdss::Error::Schema(format!("{}: missing 'kind' field", path.display()))))
}

pub fn write_text(path: &Path, text: &str) -> CliResult<()> {
    std::fs::write(path, text).map_err(|e| usage(format!("{}: {e}", path.display())))
}
