//! Reviews, extracted features and feature sets.

mod extractor;
pub(crate) mod io;
mod sample;
mod text;

use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};

pub use extractor::{
    parse_extract_response, ExtractedFeature, ExtractionOutcome, ExtractorClient, FailedBatch,
};
pub use io::{
    parse_features_jsonl, parse_reviews_jsonl, read_features, read_reviews, write_features,
    write_reviews, FeatureRecord, ParsedFeatures,
};
pub use sample::{allocate, stratified_sample};
pub use text::{normalize_feature, preprocess_review, tokenize};

use crate::Result;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Review {
    pub review_id: String,
    pub app_id: String,
    pub body: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub submitted_at: Option<String>,
}

/// Which extractor produced a feature.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Source {
    Syntactic,
    Llm,
    Hybrid,
    Gold,
}

impl Source {
    /// Provenance after two occurrences of the same surface are combined.
    pub fn combine(self, other: Source) -> Source {
        if self == other {
            self
        } else {
            Source::Hybrid
        }
    }
}

impl fmt::Display for Source {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Source::Syntactic => "syntactic",
            Source::Llm => "llm",
            Source::Hybrid => "hybrid",
            Source::Gold => "gold",
        })
    }
}

/// A normalised feature span with provenance.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Feature {
    surface: String,
    tokens: Vec<String>,
    pub review_id: String,
    pub source: Source,
}

impl Feature {
    /// Normalise `raw` and build a feature; fails for pure punctuation.
    pub fn new(raw: &str, review_id: impl Into<String>, source: Source) -> Result<Self> {
        let surface = normalize_feature(raw)?;
        let tokens = tokenize(&surface);
        Ok(Self {
            surface,
            tokens,
            review_id: review_id.into(),
            source,
        })
    }

    pub fn surface(&self) -> &str {
        &self.surface
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }
}

/// Whether duplicates are collapsed across the corpus or only within a review.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DedupScope {
    #[default]
    Corpus,
    Review,
}

/// Deduplicated, ordered features with occurrence counts.
///
/// Entries keep first-occurrence order. Under [`DedupScope::Corpus`] no two
/// entries share a surface; under [`DedupScope::Review`] the key is the
/// `(review_id, surface)` pair.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct FeatureSet {
    scope: DedupScope,
    features: Vec<Feature>,
    freq: Vec<u64>,
    index: HashMap<String, usize>,
}

impl FeatureSet {
    pub fn new(scope: DedupScope) -> Self {
        Self {
            scope,
            ..Self::default()
        }
    }

    /// Build from features, each counting once.
    pub fn build(features: impl IntoIterator<Item = Feature>, scope: DedupScope) -> Self {
        let mut set = Self::new(scope);
        for f in features {
            set.insert(f, 1);
        }
        set
    }

    /// Build from `(feature, count)` pairs.
    pub fn from_counted(items: impl IntoIterator<Item = (Feature, u64)>, scope: DedupScope) -> Self {
        let mut set = Self::new(scope);
        for (f, n) in items {
            set.insert(f, n);
        }
        set
    }

    pub fn scope(&self) -> DedupScope {
        self.scope
    }

    fn key(&self, f: &Feature) -> String {
        match self.scope {
            DedupScope::Corpus => f.surface.clone(),
            DedupScope::Review => format!("{}\u{1f}{}", f.review_id, f.surface),
        }
    }

    /// Add `count` occurrences of `feature`. Returns `true` if the key was new.
    ///
    /// A repeated key keeps the earliest feature, adds the counts, and marks
    /// the source hybrid when the two sources differ.
    pub fn insert(&mut self, feature: Feature, count: u64) -> bool {
        let key = self.key(&feature);
        match self.index.get(&key) {
            Some(&i) => {
                self.freq[i] += count;
                let existing = &mut self.features[i];
                existing.source = existing.source.combine(feature.source);
                false
            }
            None => {
                self.index.insert(key, self.features.len());
                self.features.push(feature);
                self.freq.push(count);
                true
            }
        }
    }

    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    pub fn features(&self) -> &[Feature] {
        &self.features
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Feature, u64)> {
        self.features.iter().zip(self.freq.iter().copied())
    }

    /// Count for a surface (corpus scope) or for the first entry carrying it
    /// (review scope).
    pub fn frequency(&self, surface: &str) -> Option<u64> {
        match self.scope {
            DedupScope::Corpus => self.index.get(surface).map(|&i| self.freq[i]),
            DedupScope::Review => self
                .features
                .iter()
                .position(|f| f.surface == surface)
                .map(|i| self.freq[i]),
        }
    }

    /// Sum of all counts, i.e. the number of occurrences before deduplication.
    pub fn total_count(&self) -> u64 {
        self.freq.iter().sum()
    }

    /// Distinct surfaces in first-occurrence order.
    pub fn unique_surfaces(&self) -> Vec<String> {
        let mut seen = std::collections::HashSet::new();
        self.features
            .iter()
            .filter(|f| seen.insert(f.surface.as_str()))
            .map(|f| f.surface.clone())
            .collect()
    }

    /// Features grouped per review, in first-occurrence order of reviews.
    pub fn by_review(&self) -> Vec<(String, Vec<Feature>)> {
        let mut order: Vec<(String, Vec<Feature>)> = Vec::new();
        let mut pos: HashMap<&str, usize> = HashMap::new();
        for f in &self.features {
            let i = *pos.entry(f.review_id.as_str()).or_insert_with(|| {
                order.push((f.review_id.clone(), Vec::new()));
                order.len() - 1
            });
            order[i].1.push(f.clone());
        }
        order
    }
}

/// Hybrid union of two feature sets.
///
/// Entries of `a` come first in their order, followed by the entries of `b`
/// whose key is new. Colliding entries keep `a`'s feature, sum their counts
/// and become [`Source::Hybrid`] when the sources differ.
pub fn merge_feature_sets(a: &FeatureSet, b: &FeatureSet) -> FeatureSet {
    let mut out = a.clone();
    for (f, n) in b.iter() {
        out.insert(f.clone(), n);
    }
    out
}
