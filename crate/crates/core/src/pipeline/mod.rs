//! File-based orchestration. Every stage reads and writes documented files
//! in the output directory, so `run` and the individual stages in order
//! produce the same artifacts.

mod config;
mod manifest;
pub mod stages;

pub use config::{
    ClusteringConfig, EmbeddingConfig, EmbeddingMode, ExtractorSpec, Inputs, MergeConfig, PipelineConfig, API_KEY_ENV,
};
pub use manifest::{Manifest, StageRecord, StageStatus, MANIFEST, TIMINGS};
pub use stages::StageOutput;

use std::collections::BTreeMap;
use std::time::Instant;

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Stage {
    Ingest,
    Sample,
    ExtractMerge,
    Embed,
    Cluster,
    Select,
    Tag,
    Merge,
    Eval,
    Report,
    ExportDot,
}

impl Stage {
    pub const ALL: [Stage; 11] = [
        Stage::Ingest,
        Stage::Sample,
        Stage::ExtractMerge,
        Stage::Embed,
        Stage::Cluster,
        Stage::Select,
        Stage::Tag,
        Stage::Merge,
        Stage::Eval,
        Stage::Report,
        Stage::ExportDot,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Stage::Ingest => "ingest",
            Stage::Sample => "sample",
            Stage::ExtractMerge => "extract-merge",
            Stage::Embed => "embed",
            Stage::Cluster => "cluster",
            Stage::Select => "select",
            Stage::Tag => "tag",
            Stage::Merge => "merge",
            Stage::Eval => "eval",
            Stage::Report => "report",
            Stage::ExportDot => "export-dot",
        }
    }

    fn body(self, cfg: &PipelineConfig) -> Result<StageOutput> {
        match self {
            Stage::Ingest => stages::ingest(cfg),
            Stage::Sample => stages::sample(cfg),
            Stage::ExtractMerge => stages::extract_merge(cfg),
            Stage::Embed => stages::embed(cfg),
            Stage::Cluster => stages::cluster(cfg),
            Stage::Select => stages::select_stage(cfg),
            Stage::Tag => stages::tag(cfg),
            Stage::Merge => stages::merge(cfg),
            Stage::Eval => stages::eval(cfg),
            Stage::Report => stages::report(cfg),
            Stage::ExportDot => stages::export_dot(cfg),
        }
    }
}

fn providers(cfg: &PipelineConfig) -> BTreeMap<String, String> {
    let mut p = BTreeMap::new();
    p.insert("embedding".to_string(), stages::embedding_tag(cfg));
    p.insert("labeler".to_string(), stages::labeler_tag(cfg));
    for (i, x) in cfg.extractors.iter().enumerate() {
        p.insert(format!("extractor.{i}"), format!("{}:{}", x.source, x.endpoint));
    }
    p
}

/// Validate, then run one stage and fold its outcome into the manifest.
///
/// An existing manifest with the same config hash is extended; otherwise a
/// fresh one is started.
pub fn run_stage(config: &PipelineConfig, stage: Stage) -> Result<Manifest> {
    let cfg = config.effective();
    cfg.validate()?;
    let hash = cfg.hash()?;
    let dir = cfg.output_dir.clone();
    let path = dir.join(MANIFEST);
    let mut manifest = match Manifest::read(&path) {
        Ok(m) if m.config_hash == hash => m,
        _ => Manifest::new(hash, cfg.seed, providers(&cfg)),
    };
    std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;

    let started = Instant::now();
    let result = stage.body(&cfg);
    manifest::record_timing(&dir, stage.name(), started.elapsed().as_secs_f64() * 1e3)?;
    match result {
        Ok(output) => {
            for w in &output.warnings {
                log::warn!("{}: {w}", stage.name());
            }
            for a in &output.artifacts {
                manifest.add_artifact(&dir, a)?;
            }
            manifest.record(StageRecord {
                name: stage.name().to_string(),
                status: if output.skipped { StageStatus::Skipped } else { StageStatus::Ok },
                warnings: output.warnings,
                error: None,
            });
            manifest.write(&path)?;
            Ok(manifest)
        }
        Err(err) => {
            manifest.record(StageRecord {
                name: stage.name().to_string(),
                status: StageStatus::Failed,
                warnings: Vec::new(),
                error: Some(err.to_string()),
            });
            manifest.write(&path)?;
            Err(Error::Stage {
                stage: stage.name(),
                source: Box::new(err),
            })
        }
    }
}

/// Every stage in order, starting from a fresh manifest.
pub fn run_pipeline(config: &PipelineConfig) -> Result<Manifest> {
    let cfg = config.effective();
    cfg.validate()?;
    for name in [MANIFEST, TIMINGS] {
        let p = cfg.output_dir.join(name);
        if p.exists() {
            std::fs::remove_file(&p).map_err(|e| Error::io(&p, e))?;
        }
    }
    let mut last = None;
    for stage in Stage::ALL {
        last = Some(run_stage(&cfg, stage)?);
    }
    Ok(last.expect("at least one stage"))
}
