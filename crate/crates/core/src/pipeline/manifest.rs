use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::corpus::io::{read_text, write_text};
use crate::{Error, Result};

pub const MANIFEST: &str = "manifest.json";
pub const TIMINGS: &str = "timings.json";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StageStatus {
    Ok,
    Skipped,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageRecord {
    pub name: String,
    pub status: StageStatus,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// Run record. Wall-clock timings live in a separate file so that two runs
/// of the same config produce byte-identical manifests.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub config_hash: String,
    pub seed: u64,
    pub providers: BTreeMap<String, String>,
    pub stages: Vec<StageRecord>,
    /// Artifact file name to SHA-256 of its contents.
    pub artifacts: BTreeMap<String, String>,
    /// True when some stage failed, so later artifacts may be missing or stale.
    pub partial: bool,
}

impl Manifest {
    pub fn new(config_hash: String, seed: u64, providers: BTreeMap<String, String>) -> Self {
        Self {
            config_hash,
            seed,
            providers,
            stages: Vec::new(),
            artifacts: BTreeMap::new(),
            partial: false,
        }
    }

    pub fn read(path: &Path) -> Result<Self> {
        serde_json::from_str(&read_text(path)?).map_err(Error::from)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        write_text(path, &(serde_json::to_string_pretty(self)? + "\n"))
    }

    /// Replace the record of the same stage, or append.
    pub fn record(&mut self, rec: StageRecord) {
        match self.stages.iter_mut().find(|s| s.name == rec.name) {
            Some(slot) => *slot = rec,
            None => self.stages.push(rec),
        }
        self.partial = self.stages.iter().any(|s| s.status == StageStatus::Failed);
    }

    pub fn add_artifact(&mut self, dir: &Path, name: &str) -> Result<()> {
        let path = dir.join(name);
        let bytes = std::fs::read(&path).map_err(|e| Error::io(&path, e))?;
        self.artifacts.insert(name.to_string(), hex::encode(Sha256::digest(&bytes)));
        Ok(())
    }
}

/// Stage name to elapsed milliseconds.
pub(crate) fn record_timing(dir: &Path, stage: &str, millis: f64) -> Result<()> {
    let path = dir.join(TIMINGS);
    let mut t: BTreeMap<String, f64> = match read_text(&path) {
        Ok(text) => serde_json::from_str(&text).unwrap_or_default(),
        Err(_) => BTreeMap::new(),
    };
    t.insert(stage.to_string(), millis);
    write_text(&path, &serde_json::to_string_pretty(&t)?)
}
