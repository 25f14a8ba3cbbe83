//! Stage bodies. Each reads its inputs from the output directory (or the
//! configured input files) and writes its artifacts back there.

use std::collections::{BTreeMap, HashSet};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;

use super::config::{EmbeddingMode, PipelineConfig, API_KEY_ENV};
use crate::cluster::{linkage, read_candidates, sweep, write_candidates, Dendrogram};
use crate::corpus::io::{read_text, write_text};
use crate::corpus::{
    preprocess_review, read_features, read_reviews, stratified_sample, write_features, write_reviews, DedupScope,
    ExtractorClient, FeatureSet, Review,
};
use crate::embed::{
    affinity, embed_texts, CachedEmbedder, EmbedOptions, EmbeddingMatrix, EmbeddingProvider, HashingEmbedder,
    RemoteEmbedder, VectorCache,
};
use crate::eval::{eval_table, evaluate_all, parse_gold_jsonl, quality_report, read_gold, EvalReport, ReportInputs};
use crate::http::RetryPolicy;
use crate::select::{select, Selection};
use crate::taxonomy::{
    build_hierarchy, label_internal_nodes, merge_taxonomies, read_taxonomies, to_csv, to_dot, write_taxonomies,
    ChatLabeler, Labeler, LabelerMode, StubLabeler, Taxonomy,
};
use crate::{Error, Result};

pub const REVIEWS: &str = "reviews.jsonl";
pub const SAMPLE: &str = "reviews.sample.jsonl";
pub const FEATURES: &str = "features.jsonl";
pub const PREDICTED: &str = "predicted.jsonl";
pub const VECTORS: &str = "vectors.jsonl";
pub const DENDROGRAM: &str = "dendrogram.json";
pub const CANDIDATES: &str = "candidates.json";
pub const SELECTION: &str = "selection.json";
pub const TAXONOMIES_RAW: &str = "taxonomies.raw.json";
pub const TAXONOMIES: &str = "taxonomies.json";
pub const MERGES: &str = "merges.json";
pub const EVAL_JSON: &str = "eval.json";
pub const EVAL_TXT: &str = "eval.txt";
pub const REPORT_JSON: &str = "quality_report.json";
pub const REPORT_TXT: &str = "quality_report.txt";
pub const DOT: &str = "taxonomies.dot";
pub const NODES: &str = "nodes.csv";
pub const EDGES: &str = "edges.csv";

/// What a stage produced.
#[derive(Debug, Default)]
pub struct StageOutput {
    pub artifacts: Vec<&'static str>,
    pub warnings: Vec<String>,
    pub skipped: bool,
}

impl StageOutput {
    fn wrote(artifacts: &[&'static str]) -> Self {
        Self {
            artifacts: artifacts.to_vec(),
            ..Self::default()
        }
    }

    fn skipped(reason: &str) -> Self {
        Self {
            warnings: vec![reason.to_string()],
            skipped: true,
            ..Self::default()
        }
    }
}

fn out(cfg: &PipelineConfig, name: &str) -> PathBuf {
    cfg.output_dir.join(name)
}

fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    write_text(path, &(serde_json::to_string_pretty(value)? + "\n"))
}

fn api_key() -> Option<String> {
    std::env::var(API_KEY_ENV).ok().filter(|k| !k.is_empty())
}

pub(crate) fn embedding_tag(cfg: &PipelineConfig) -> String {
    match cfg.embedding.mode {
        EmbeddingMode::Hashing => HashingEmbedder {
            dim: cfg.embedding.dim,
            seed: cfg.seed,
        }
        .tag(),
        EmbeddingMode::Remote => format!("remote:{}", cfg.embedding.model),
    }
}

pub(crate) fn labeler_tag(cfg: &PipelineConfig) -> String {
    match cfg.labeler.mode {
        LabelerMode::DeterministicStub => StubLabeler.tag(),
        LabelerMode::RemoteLlm => format!("chat:{}", cfg.labeler.model),
    }
}

/// Embed `texts` with the configured provider, reading and updating the
/// vector cache file when one is configured.
fn embed_with_config(cfg: &PipelineConfig, texts: &[String]) -> Result<Vec<Vec<f64>>> {
    let e = &cfg.embedding;
    let provider: Box<dyn EmbeddingProvider> = match e.mode {
        EmbeddingMode::Hashing => Box::new(HashingEmbedder::new(e.dim, cfg.seed)?),
        EmbeddingMode::Remote => Box::new(RemoteEmbedder::new(
            e.endpoint.clone().unwrap_or_default(),
            e.model.clone(),
            api_key(),
            RetryPolicy::default(),
        )),
    };
    let opts = EmbedOptions {
        batch_size: e.batch_size,
        max_in_flight: e.max_in_flight,
    };
    match &e.cache_path {
        None => embed_texts(provider.as_ref(), texts, opts),
        Some(path) => {
            let cache = if path.is_file() { VectorCache::load(path)? } else { VectorCache::new() };
            let cached = CachedEmbedder::new(provider, cache);
            let rows = embed_texts(&cached, texts, opts);
            cached.into_cache().save(path)?;
            rows
        }
    }
}

fn load_matrix(cfg: &PipelineConfig) -> Result<EmbeddingMatrix> {
    let cache = VectorCache::load(&out(cfg, VECTORS))?;
    let (ids, rows): (Vec<String>, Vec<Vec<f64>>) = cache.iter().map(|(s, v)| (s.to_string(), v.to_vec())).unzip();
    EmbeddingMatrix::from_rows(ids, rows, embedding_tag(cfg))
}

fn read_selection(cfg: &PipelineConfig) -> Result<Selection> {
    Ok(serde_json::from_str(&read_text(&out(cfg, SELECTION))?)?)
}

pub fn ingest(cfg: &PipelineConfig) -> Result<StageOutput> {
    let Some(path) = &cfg.inputs.reviews else {
        return Ok(StageOutput::skipped("no reviews input"));
    };
    let mut warnings = Vec::new();
    let mut kept = Vec::new();
    for r in read_reviews(path)? {
        match preprocess_review(&r.body) {
            Ok(body) => kept.push(Review { body, ..r }),
            Err(e) => warnings.push(format!("review {}: {e}", r.review_id)),
        }
    }
    write_reviews(&out(cfg, REVIEWS), &kept)?;
    Ok(StageOutput {
        artifacts: vec![REVIEWS],
        warnings,
        skipped: false,
    })
}

pub fn sample(cfg: &PipelineConfig) -> Result<StageOutput> {
    let Some(size) = cfg.sample_size else {
        return Ok(StageOutput::skipped("no sample_size configured"));
    };
    let reviews = read_reviews(&out(cfg, REVIEWS))?;
    let size = usize::try_from(size).map_err(|_| Error::Config("sample_size too large".into()))?;
    write_reviews(&out(cfg, SAMPLE), &stratified_sample(&reviews, size, cfg.seed)?)?;
    Ok(StageOutput::wrote(&[SAMPLE]))
}

/// Reviews feeding extraction: the sample when one is configured.
fn working_reviews(cfg: &PipelineConfig) -> Result<Option<Vec<Review>>> {
    if cfg.inputs.reviews.is_none() {
        return Ok(None);
    }
    let name = if cfg.sample_size.is_some() { SAMPLE } else { REVIEWS };
    read_reviews(&out(cfg, name)).map(Some)
}

#[derive(Serialize)]
struct PredictedLine<'a> {
    review_id: &'a str,
    features: Vec<&'a str>,
}

pub fn extract_merge(cfg: &PipelineConfig) -> Result<StageOutput> {
    let reviews = working_reviews(cfg)?;
    let keep: Option<HashSet<&str>> = reviews
        .as_ref()
        .map(|rs| rs.iter().map(|r| r.review_id.as_str()).collect());
    let mut warnings = Vec::new();
    let mut union = FeatureSet::new(DedupScope::Review);

    for path in &cfg.inputs.features {
        let parsed = read_features(path)?;
        for (line, raw) in &parsed.rejected {
            warnings.push(format!("{}:{line}: dropped {raw:?}", path.display()));
        }
        for (f, n) in parsed.features {
            if keep.as_ref().is_none_or(|k| k.contains(f.review_id.as_str())) {
                union.insert(f, n);
            }
        }
    }
    if let Some(reviews) = &reviews {
        for spec in &cfg.extractors {
            let client = ExtractorClient::new(spec.endpoint.clone(), spec.source, RetryPolicy::default())
                .with_batch_size(spec.batch_size);
            let got = client.fetch(reviews);
            warnings.extend(got.diagnostics.iter().map(|d| format!("{}: {d}", spec.endpoint)));
            for fb in &got.failed {
                warnings.push(format!(
                    "{}: {} review(s) not extracted: {}",
                    spec.endpoint,
                    fb.review_ids.len(),
                    fb.reason
                ));
            }
            for (f, n) in got.features.iter() {
                union.insert(f.clone(), n);
            }
        }
    }
    if union.is_empty() {
        return Err(Error::invalid("features", "no features left after merging the sources"));
    }

    let mut predicted = String::new();
    for (review_id, feats) in union.by_review() {
        let line = PredictedLine {
            review_id: &review_id,
            features: feats.iter().map(|f| f.surface()).collect(),
        };
        let _ = writeln!(predicted, "{}", serde_json::to_string(&line)?);
    }
    write_text(&out(cfg, PREDICTED), &predicted)?;
    let set = FeatureSet::from_counted(union.iter().map(|(f, n)| (f.clone(), n)), cfg.dedup_scope);
    write_features(&out(cfg, FEATURES), &set)?;
    Ok(StageOutput {
        artifacts: vec![FEATURES, PREDICTED],
        warnings,
        skipped: false,
    })
}

pub fn embed(cfg: &PipelineConfig) -> Result<StageOutput> {
    let parsed = read_features(&out(cfg, FEATURES))?;
    let set = FeatureSet::from_counted(parsed.features, cfg.dedup_scope);
    let ids = set.unique_surfaces();
    if ids.is_empty() {
        return Err(Error::invalid("features", "nothing to embed"));
    }
    let rows = embed_with_config(cfg, &ids)?;
    let m = EmbeddingMatrix::from_rows(ids, rows, embedding_tag(cfg))?;
    m.to_cache().save(&out(cfg, VECTORS))?;
    Ok(StageOutput::wrote(&[VECTORS]))
}

pub fn cluster(cfg: &PipelineConfig) -> Result<StageOutput> {
    let e = load_matrix(cfg)?;
    let a = affinity(&e)?;
    let d = linkage(&a, cfg.clustering.linkage)?;
    d.write(&out(cfg, DENDROGRAM))?;
    let candidates = sweep(&e, &a, &d, &cfg.clustering.sweep)?;
    write_candidates(&out(cfg, CANDIDATES), &candidates)?;
    Ok(StageOutput::wrote(&[DENDROGRAM, CANDIDATES]))
}

pub fn select_stage(cfg: &PipelineConfig) -> Result<StageOutput> {
    let candidates = read_candidates(&out(cfg, CANDIDATES))?;
    let sel = select(&candidates, &cfg.selection)?;
    write_json(&out(cfg, SELECTION), &sel)?;
    Ok(StageOutput::wrote(&[SELECTION]))
}

fn make_labeler(cfg: &PipelineConfig) -> Result<Box<dyn Labeler>> {
    Ok(match cfg.labeler.mode {
        LabelerMode::DeterministicStub => Box::new(StubLabeler),
        LabelerMode::RemoteLlm => Box::new(ChatLabeler::new(&cfg.labeler, api_key(), RetryPolicy::default())?),
    })
}

pub fn tag(cfg: &PipelineConfig) -> Result<StageOutput> {
    let e = load_matrix(cfg)?;
    let d = Dendrogram::read(&out(cfg, DENDROGRAM))?;
    let candidates = read_candidates(&out(cfg, CANDIDATES))?;
    let sel = read_selection(cfg)?;
    let chosen = candidates
        .get(sel.chosen)
        .ok_or_else(|| Error::invalid("selection", format!("candidate {} does not exist", sel.chosen)))?;
    if d.n_leaves != e.len() || chosen.assignment.len() != e.len() {
        return Err(Error::invalid("artifacts", "vectors, dendrogram and candidates disagree on the feature count"));
    }
    let labeler = make_labeler(cfg)?;
    let min = cfg.labeler.min_subtree_size;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.labeler.max_in_flight)
        .build()
        .map_err(|e| Error::Config(e.to_string()))?;
    let ids = e.ids().to_vec();
    let trees: Vec<_> = pool.install(|| {
        chosen
            .members()
            .par_iter()
            .map(|members| {
                let mut root = build_hierarchy(members, &d, &ids, min)?;
                let diagnostics = label_internal_nodes(&mut root, labeler.as_ref(), min);
                Ok((root, diagnostics))
            })
            .collect::<Result<Vec<_>>>()
    })?;
    let labels: Vec<String> = trees.iter().map(|(r, _)| r.label.clone()).collect();
    let label_vecs = embed_with_config(cfg, &labels)?;
    let mut warnings = Vec::new();
    let taxonomies: Vec<Taxonomy> = trees
        .into_iter()
        .zip(label_vecs)
        .enumerate()
        .map(|(c, ((root, diagnostics), emb))| {
            warnings.extend(diagnostics.iter().cloned());
            Taxonomy {
                provenance: vec![c],
                root_label_embedding: emb,
                root,
                diagnostics,
            }
        })
        .collect();
    write_taxonomies(&out(cfg, TAXONOMIES_RAW), &taxonomies)?;
    Ok(StageOutput {
        artifacts: vec![TAXONOMIES_RAW],
        warnings,
        skipped: false,
    })
}

pub fn merge(cfg: &PipelineConfig) -> Result<StageOutput> {
    let raw = read_taxonomies(&out(cfg, TAXONOMIES_RAW))?;
    let merged = merge_taxonomies(raw, cfg.merge.sigma)?;
    write_taxonomies(&out(cfg, TAXONOMIES), &merged.taxonomies)?;
    write_json(&out(cfg, MERGES), &merged.events)?;
    Ok(StageOutput::wrote(&[TAXONOMIES, MERGES]))
}

pub fn eval(cfg: &PipelineConfig) -> Result<StageOutput> {
    let Some(gold_path) = &cfg.inputs.gold else {
        return Ok(StageOutput::skipped("no gold annotations"));
    };
    let gold = read_gold(gold_path)?;
    let predicted: BTreeMap<_, _> = parse_gold_jsonl(&read_text(&out(cfg, PREDICTED))?)?
        .into_iter()
        .map(|p| (p.review_id, p.features))
        .collect();
    let reports = evaluate_all(&predicted, &gold, &cfg.eval)?;
    write_json(&out(cfg, EVAL_JSON), &reports)?;
    write_text(&out(cfg, EVAL_TXT), &eval_table(&reports))?;
    Ok(StageOutput::wrote(&[EVAL_JSON, EVAL_TXT]))
}

pub fn report(cfg: &PipelineConfig) -> Result<StageOutput> {
    let e = load_matrix(cfg)?;
    let candidates = read_candidates(&out(cfg, CANDIDATES))?;
    let sel = read_selection(cfg)?;
    let clusters = read_taxonomies(&out(cfg, TAXONOMIES_RAW))?;
    let taxonomies = read_taxonomies(&out(cfg, TAXONOMIES))?;
    let eval: Vec<EvalReport> = if cfg.inputs.gold.is_some() {
        serde_json::from_str(&read_text(&out(cfg, EVAL_JSON))?)?
    } else {
        Vec::new()
    };
    let rep = quality_report(&ReportInputs {
        embeddings: &e,
        candidates: &candidates,
        selection: &sel,
        clusters: &clusters,
        taxonomies: &taxonomies,
        eval: &eval,
    })?;
    write_json(&out(cfg, REPORT_JSON), &rep)?;
    write_text(&out(cfg, REPORT_TXT), &rep.to_text())?;
    Ok(StageOutput::wrote(&[REPORT_JSON, REPORT_TXT]))
}

pub fn export_dot(cfg: &PipelineConfig) -> Result<StageOutput> {
    let taxonomies = read_taxonomies(&out(cfg, TAXONOMIES))?;
    write_text(&out(cfg, DOT), &to_dot(&taxonomies))?;
    let csv = to_csv(&taxonomies)?;
    write_text(&out(cfg, NODES), &csv.nodes)?;
    write_text(&out(cfg, EDGES), &csv.edges)?;
    Ok(StageOutput::wrote(&[DOT, NODES, EDGES]))
}
