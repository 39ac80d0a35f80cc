//! In-memory report artifacts and the on-disk layout with its `MANIFEST`.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::RunError;

pub const MANIFEST: &str = "MANIFEST";

/// One output file held in memory until [`emit_report`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Artifact {
    pub name: String,
    pub bytes: Vec<u8>,
}

impl Artifact {
    pub fn new(name: impl Into<String>, bytes: Vec<u8>) -> Self {
        Self { name: name.into(), bytes }
    }

    pub fn json<T: Serialize>(name: impl Into<String>, value: &T) -> Self {
        let mut bytes = serde_json::to_vec_pretty(value).expect("report serializes");
        bytes.push(b'\n');
        Self::new(name, bytes)
    }

    /// A single-line JSON document per value.
    pub fn json_lines<T: Serialize>(name: impl Into<String>, values: &[T]) -> Self {
        let mut bytes = Vec::new();
        for v in values {
            serde_json::to_writer(&mut bytes, v).expect("report serializes");
            bytes.push(b'\n');
        }
        Self::new(name, bytes)
    }
}

/// Decimal text of a float: shortest round-trip digits in scientific form,
/// independent of locale.
pub fn num(v: f64) -> String {
    format!("{v:e}")
}

/// CSV table with a fixed header.
#[derive(Debug, Clone)]
pub struct Table {
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new<S: Into<String>>(header: impl IntoIterator<Item = S>) -> Self {
        Self { header: header.into_iter().map(Into::into).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        assert_eq!(row.len(), self.header.len(), "row width differs from the header");
        self.rows.push(row);
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn into_artifact(self, name: impl Into<String>) -> Result<Artifact, RunError> {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
        w.write_record(&self.header)?;
        for row in &self.rows {
            w.write_record(row)?;
        }
        let bytes = w.into_inner().map_err(|e| RunError::Io(std::io::Error::other(e.to_string())))?;
        Ok(Artifact::new(name, bytes))
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    format!("{:x}", Sha256::digest(bytes))
}

/// Text of the manifest: the config hash followed by one `name sha256` line per file.
pub fn manifest(config_hash: &str, artifacts: &[Artifact]) -> String {
    let mut names: Vec<&Artifact> = artifacts.iter().collect();
    names.sort_by(|a, b| a.name.cmp(&b.name));
    let mut text = format!("config_sha256 {config_hash}\nfiles {}\n", names.len());
    for a in names {
        text.push_str(&format!("{} {}\n", a.name, sha256_hex(&a.bytes)));
    }
    text
}

/// Writes the artifacts and a `MANIFEST` into `dir`, returning every path written.
pub fn emit_report(artifacts: &[Artifact], dir: &Path, config_hash: &str) -> Result<Vec<PathBuf>, RunError> {
    fs::create_dir_all(dir)?;
    let mut paths = Vec::with_capacity(artifacts.len() + 1);
    for a in artifacts {
        if a.name == MANIFEST || a.name.contains(['/', '\\']) || a.name.is_empty() {
            return Err(RunError::Io(std::io::Error::other(format!("bad artifact name `{}`", a.name))));
        }
        let path = dir.join(&a.name);
        fs::write(&path, &a.bytes)?;
        paths.push(path);
    }
    let path = dir.join(MANIFEST);
    fs::write(&path, manifest(config_hash, artifacts))?;
    paths.push(path);
    Ok(paths)
}
