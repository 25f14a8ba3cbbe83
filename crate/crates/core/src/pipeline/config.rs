use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::cluster::{Linkage, SweepConfig};
use crate::corpus::io::read_text;
use crate::corpus::{DedupScope, Source};
use crate::eval::EvalConfig;
use crate::select::SelectionConfig;
use crate::taxonomy::{LabelerConfig, LabelerMode, DEFAULT_SIGMA};
use crate::{Error, Result};

/// Environment variable holding the bearer token for remote services.
pub const API_KEY_ENV: &str = "FECLUST_LLM_API_KEY";

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Inputs {
    pub reviews: Option<PathBuf>,
    /// Feature JSONL files, merged in order.
    pub features: Vec<PathBuf>,
    pub gold: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExtractorSpec {
    pub endpoint: String,
    pub source: Source,
    #[serde(default = "default_extract_batch")]
    pub batch_size: usize,
}

fn default_extract_batch() -> usize {
    32
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EmbeddingMode {
    #[default]
    Hashing,
    Remote,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EmbeddingConfig {
    pub mode: EmbeddingMode,
    pub endpoint: Option<String>,
    pub model: String,
    /// Hashing dimension; remote providers report their own.
    pub dim: usize,
    pub cache_path: Option<PathBuf>,
    pub batch_size: usize,
    pub max_in_flight: usize,
}

impl Default for EmbeddingConfig {
    fn default() -> Self {
        Self {
            mode: EmbeddingMode::Hashing,
            endpoint: None,
            model: "all-MiniLM-L6-v2".into(),
            dim: 384,
            cache_path: None,
            batch_size: 64,
            max_in_flight: 4,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClusteringConfig {
    pub linkage: Linkage,
    pub sweep: SweepConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MergeConfig {
    pub sigma: f64,
    /// Weight of tree-shape similarity when gating merges. Only 0 is
    /// supported; merges are gated on root-label similarity alone.
    pub structural_weight: f64,
}

impl Default for MergeConfig {
    fn default() -> Self {
        Self {
            sigma: DEFAULT_SIGMA,
            structural_weight: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub inputs: Inputs,
    pub sample_size: Option<u64>,
    pub dedup_scope: DedupScope,
    pub extractors: Vec<ExtractorSpec>,
    pub embedding: EmbeddingConfig,
    pub clustering: ClusteringConfig,
    pub selection: SelectionConfig,
    pub labeler: LabelerConfig,
    pub merge: MergeConfig,
    pub eval: EvalConfig,
    pub seed: u64,
    pub output_dir: PathBuf,
    /// Hashing embedder, stub labeller and no extractor calls.
    pub offline: bool,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            inputs: Inputs::default(),
            sample_size: None,
            dedup_scope: DedupScope::Corpus,
            extractors: Vec::new(),
            embedding: EmbeddingConfig::default(),
            clustering: ClusteringConfig::default(),
            selection: SelectionConfig::default(),
            labeler: LabelerConfig::default(),
            merge: MergeConfig::default(),
            eval: EvalConfig::default(),
            seed: 0,
            output_dir: PathBuf::from("out"),
            offline: false,
        }
    }
}

impl PipelineConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    /// Read a config file; relative paths inside it resolve against the
    /// file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let mut cfg = Self::from_json(&read_text(path)?)?;
        let base = path.parent().unwrap_or(Path::new(""));
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        cfg.inputs.reviews.iter_mut().for_each(fix);
        cfg.inputs.features.iter_mut().for_each(fix);
        cfg.inputs.gold.iter_mut().for_each(fix);
        cfg.embedding.cache_path.iter_mut().for_each(fix);
        fix(&mut cfg.output_dir);
        Ok(cfg)
    }

    /// Set one field by dotted path, e.g. `selection.strategy=conservative`
    /// or `clustering.sweep.step=0.1`. The value is read as JSON when it
    /// parses, otherwise as a string.
    pub fn set(&mut self, assignment: &str) -> Result<()> {
        let (path, raw) = assignment
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("override {assignment:?} is not key=value")))?;
        let value: Value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
        let mut doc = serde_json::to_value(&*self)?;
        let mut slot = &mut doc;
        for key in path.split('.') {
            slot = slot
                .as_object_mut()
                .and_then(|o| o.get_mut(key))
                .ok_or_else(|| Error::Config(format!("unknown config field {path:?}")))?;
        }
        *slot = value;
        *self = serde_json::from_value(doc).map_err(|e| Error::Config(format!("{path}: {e}")))?;
        Ok(())
    }

    /// The configuration actually executed: `offline` pins the hashing
    /// embedder and stub labeller and drops remote extractors.
    pub fn effective(&self) -> Self {
        let mut c = self.clone();
        if c.offline {
            c.embedding.mode = EmbeddingMode::Hashing;
            c.labeler.mode = LabelerMode::DeterministicStub;
            c.extractors.clear();
        }
        c
    }

    /// Static checks plus input existence; nothing is written.
    pub fn validate(&self) -> Result<()> {
        self.clustering.sweep.validate()?;
        if self.clustering.linkage != Linkage::Average {
            return Err(Error::Config(format!(
                "{:?} linkage is not supported; use average",
                self.clustering.linkage
            )));
        }
        self.selection.validate()?;
        self.labeler.validate()?;
        self.eval.validate()?;
        if !(0.0..=1.0).contains(&self.merge.sigma) {
            return Err(Error::Config(format!("merge.sigma must lie in [0, 1], got {}", self.merge.sigma)));
        }
        if self.merge.structural_weight != 0.0 {
            return Err(Error::Config("merge.structural_weight is not supported; leave it at 0".into()));
        }
        let e = &self.embedding;
        if e.batch_size == 0 || e.max_in_flight == 0 {
            return Err(Error::Config("embedding batch_size and max_in_flight must be positive".into()));
        }
        match e.mode {
            EmbeddingMode::Hashing if e.dim < 8 => {
                return Err(Error::Config(format!("embedding.dim must be at least 8, got {}", e.dim)))
            }
            EmbeddingMode::Remote if e.endpoint.as_deref().is_none_or(str::is_empty) => {
                return Err(Error::Config("remote embedding needs embedding.endpoint".into()))
            }
            _ => {}
        }
        if self.inputs.features.is_empty() && (self.inputs.reviews.is_none() || self.extractors.is_empty()) {
            return Err(Error::Config(
                "no feature source: give inputs.features or inputs.reviews with extractors".into(),
            ));
        }
        if self.sample_size.is_some() && self.inputs.reviews.is_none() {
            return Err(Error::Config("sample_size needs inputs.reviews".into()));
        }
        if self.extractors.iter().any(|x| x.batch_size == 0) {
            return Err(Error::Config("extractor batch_size must be positive".into()));
        }
        for p in self.input_paths() {
            if !p.is_file() {
                return Err(Error::Config(format!("input file {} does not exist", p.display())));
            }
        }
        Ok(())
    }

    pub fn input_paths(&self) -> Vec<&Path> {
        let i = &self.inputs;
        i.reviews
            .iter()
            .chain(&i.features)
            .chain(&i.gold)
            .map(PathBuf::as_path)
            .collect()
    }

    /// SHA-256 over the canonical JSON of the effective config followed by
    /// the bytes of every input file.
    pub fn hash(&self) -> Result<String> {
        let eff = self.effective();
        let mut h = Sha256::new();
        h.update(serde_json::to_vec(&eff)?);
        for p in eff.input_paths() {
            let bytes = std::fs::read(p).map_err(|e| Error::io(p, e))?;
            h.update((bytes.len() as u64).to_le_bytes());
            h.update(&bytes);
        }
        Ok(hex::encode(h.finalize()))
    }
}
