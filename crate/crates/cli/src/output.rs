use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use memesim::experiment::SweepRecord;
use memesim::{RunSeed, SimParams, SweepSpec};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub const MANIFEST: &str = "manifest.json";

/// Owns the output directory. Files are only ever created directly inside
/// it, each written to a temporary sibling and renamed into place.
pub struct OutDir {
    root: PathBuf,
    hashes: BTreeMap<String, String>,
}

impl OutDir {
    pub fn create(root: &Path) -> Result<Self> {
        fs::create_dir_all(root)
            .with_context(|| format!("cannot create output directory {}", root.display()))?;
        Ok(OutDir {
            root: root.to_path_buf(),
            hashes: BTreeMap::new(),
        })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }

    fn write_raw(&self, name: &str, bytes: &[u8]) -> Result<()> {
        assert!(
            !name.contains(['/', '\\']) && !name.starts_with('.'),
            "bad artifact name {name}"
        );
        let target = self.path(name);
        let tmp = self.path(&format!(".{name}.tmp"));
        fs::write(&tmp, bytes).with_context(|| format!("cannot write {}", tmp.display()))?;
        fs::rename(&tmp, &target)
            .with_context(|| format!("cannot move {} into place", target.display()))?;
        Ok(())
    }

    /// Writes an artifact and records its hash for the manifest.
    pub fn write(&mut self, name: &str, bytes: &[u8]) -> Result<()> {
        self.write_raw(name, bytes)?;
        self.hashes.insert(name.to_string(), sha256_hex(bytes));
        Ok(())
    }

    pub fn write_manifest(&self, manifest: &Manifest) -> Result<()> {
        let mut text = serde_json::to_string_pretty(manifest)?;
        text.push('\n');
        self.write_raw(MANIFEST, text.as_bytes())
    }

    pub fn read_manifest(&self) -> Result<Manifest> {
        let path = self.path(MANIFEST);
        let text =
            fs::read_to_string(&path).with_context(|| format!("cannot read {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("invalid manifest {}", path.display()))
    }

    pub fn hashes(&self) -> BTreeMap<String, String> {
        self.hashes.clone()
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Everything needed to reproduce the files next to it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub command: String,
    pub sim: SimParams,
    pub sweep: SweepSpec,
    pub confidence_interval: String,
    pub complete: bool,
    #[serde(default)]
    pub seeds: Vec<RunSeed>,
    #[serde(default)]
    pub records: Vec<SweepRecord>,
    #[serde(default)]
    pub nonconverged_fraction: Option<f64>,
    #[serde(default)]
    pub artifacts: BTreeMap<String, String>,
}

pub const CI_METHOD: &str = "student-t 95%";

impl Manifest {
    pub fn new(command: &str, sim: &SimParams, sweep: &SweepSpec) -> Self {
        Manifest {
            command: command.to_string(),
            sim: sim.clone(),
            sweep: sweep.clone(),
            confidence_interval: CI_METHOD.to_string(),
            complete: false,
            seeds: Vec::new(),
            records: Vec::new(),
            nonconverged_fraction: None,
            artifacts: BTreeMap::new(),
        }
    }
}

/// Shortest representation that parses back to the same value.
pub fn num(v: f64) -> String {
    format!("{v}")
}

pub fn opt(v: Option<f64>) -> String {
    v.map(num).unwrap_or_default()
}

/// Collects CSV rows in memory; the file is written in one piece.
pub struct Table {
    writer: csv::Writer<Vec<u8>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Result<Self> {
        let mut writer = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(Vec::new());
        writer.write_record(header)?;
        Ok(Table { writer })
    }

    pub fn row<I, S>(&mut self, fields: I) -> Result<()>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<[u8]>,
    {
        self.writer.write_record(fields)?;
        Ok(())
    }

    pub fn into_bytes(self) -> Result<Vec<u8>> {
        self.writer
            .into_inner()
            .map_err(|e| anyhow::anyhow!("csv buffer: {e}"))
    }
}
