//! Report files. Everything is buffered and written only after the pipeline
//! finished, so a failing setup leaves no partial output behind.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{json, Value};

use vpl_core::VplError;

use crate::config::{Result, RunConfig};

const SNAPSHOT_MAGIC: &[u8; 8] = b"VPLSNAP\x01";

fn io_err(path: &Path, e: std::io::Error) -> VplError {
    VplError::Numerical(format!("cannot write {}: {e}", path.display()))
}

/// Pending output files of one run.
pub struct Outputs {
    hash: String,
    config: Value,
    files: Vec<(PathBuf, Vec<u8>)>,
}

impl Outputs {
    pub fn new(cfg: &RunConfig) -> Self {
        Self { hash: cfg.hash(), config: cfg.embedded(), files: Vec::new() }
    }

    pub fn hash(&self) -> &str {
        &self.hash
    }

    /// `{config, config_sha256, report, checks}` with sorted keys.
    pub fn json(&mut self, name: &str, report: &impl Serialize, failures: &[String]) -> Result<()> {
        let report = serde_json::to_value(report).map_err(|e| VplError::Numerical(format!("report {name}: {e}")))?;
        let doc = json!({
            "config": self.config,
            "config_sha256": self.hash,
            "report": report,
            "checks": { "passed": failures.is_empty(), "failures": failures },
        });
        let mut text = serde_json::to_string_pretty(&doc).expect("json value");
        text.push('\n');
        self.files.push((name.into(), text.into_bytes()));
        Ok(())
    }

    /// CSV with a `# config_sha256=...` line above the header row.
    pub fn csv(&mut self, name: &str, header: &[&str], rows: impl IntoIterator<Item = Vec<CsvCell>>) {
        let mut text = format!("# config_sha256={}\n{}\n", self.hash, header.join(","));
        for row in rows {
            let cells: Vec<String> = row.iter().map(CsvCell::render).collect();
            text.push_str(&cells.join(","));
            text.push('\n');
        }
        self.files.push((name.into(), text.into_bytes()));
    }

    pub fn raw(&mut self, name: &str, bytes: Vec<u8>) {
        self.files.push((name.into(), bytes));
    }

    /// Phase-space snapshot, shape `[nx_total, 2, nv³]`, little-endian f64.
    pub fn snapshot(&mut self, name: &str, t: f64, shape: [usize; 3], f: &[f64]) {
        let bytes = encode_snapshot(&self.hash, t, shape, f);
        self.files.push((name.into(), bytes));
    }

    pub fn names(&self) -> Vec<&Path> {
        self.files.iter().map(|(p, _)| p.as_path()).collect()
    }

    pub fn write(self, dir: &Path) -> Result<()> {
        for (name, bytes) in &self.files {
            let path = dir.join(name);
            if let Some(parent) = path.parent() {
                std::fs::create_dir_all(parent).map_err(|e| io_err(parent, e))?;
            }
            std::fs::write(&path, bytes).map_err(|e| io_err(&path, e))?;
        }
        Ok(())
    }
}

pub enum CsvCell {
    F(f64),
    U(usize),
    S(String),
}

impl CsvCell {
    fn render(&self) -> String {
        match self {
            Self::F(x) => format!("{x:e}"),
            Self::U(n) => n.to_string(),
            Self::S(s) => s.clone(),
        }
    }
}

/// Header of a snapshot container.
#[derive(Debug, Clone, Serialize, serde::Deserialize, PartialEq)]
pub struct SnapshotHeader {
    pub config_sha256: String,
    pub dtype: String,
    pub layout: String,
    pub shape: Vec<usize>,
    pub t: f64,
}

/// Magic, u32 header length, JSON header, then the data.
pub fn encode_snapshot(hash: &str, t: f64, shape: [usize; 3], f: &[f64]) -> Vec<u8> {
    let header = SnapshotHeader {
        config_sha256: hash.into(),
        dtype: "<f8".into(),
        layout: "x, species, v (row-major i, j, k)".into(),
        shape: shape.to_vec(),
        t,
    };
    let h = serde_json::to_vec(&header).expect("header");
    let mut out = Vec::with_capacity(12 + h.len() + 8 * f.len());
    out.extend_from_slice(SNAPSHOT_MAGIC);
    out.extend_from_slice(&(h.len() as u32).to_le_bytes());
    out.extend_from_slice(&h);
    for x in f {
        out.extend_from_slice(&x.to_le_bytes());
    }
    out
}

pub fn decode_snapshot(bytes: &[u8]) -> Result<(SnapshotHeader, Vec<f64>)> {
    let bad = |m: &str| VplError::Config(format!("snapshot container: {m}"));
    if bytes.len() < 12 || &bytes[..8] != SNAPSHOT_MAGIC {
        return Err(bad("bad magic"));
    }
    let hl = u32::from_le_bytes(bytes[8..12].try_into().expect("4 bytes")) as usize;
    let body = bytes.get(12..12 + hl).ok_or_else(|| bad("truncated header"))?;
    let header: SnapshotHeader = serde_json::from_slice(body).map_err(|e| bad(&e.to_string()))?;
    if header.dtype != "<f8" {
        return Err(bad(&format!("unsupported dtype {}", header.dtype)));
    }
    let data = &bytes[12 + hl..];
    let n: usize = header.shape.iter().product();
    if data.len() != 8 * n {
        return Err(bad(&format!("expected {n} values, found {} bytes", data.len())));
    }
    let f = data.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes"))).collect();
    Ok((header, f))
}

/// `key=value` pairs for the human-readable summary on stdout.
pub fn summary_line(pairs: &[(&str, String)]) -> String {
    let mut s = String::new();
    for (i, (k, v)) in pairs.iter().enumerate() {
        if i > 0 {
            s.push(' ');
        }
        let _ = write!(s, "{k}={v}");
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn snapshot_round_trip() {
        let f: Vec<f64> = (0..24).map(|i| (i as f64).sin()).collect();
        let bytes = encode_snapshot("abc", 0.5, [2, 2, 6], &f);
        let (h, g) = decode_snapshot(&bytes).unwrap();
        assert_eq!(h.shape, vec![2, 2, 6]);
        assert_eq!(h.t, 0.5);
        assert_eq!(g, f);
        assert!(decode_snapshot(&bytes[..bytes.len() - 1]).is_err());
    }
}
