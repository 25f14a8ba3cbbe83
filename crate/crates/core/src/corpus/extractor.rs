//! Client for external feature-extraction services.
//!
//! Wire format: `POST {"reviews":[{"id","text"}]}` answered by
//! `{"features":[{"review_id","text"}]}`.

use std::collections::HashSet;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::{DedupScope, Feature, FeatureSet, Review, Source};
use crate::http::{JsonClient, RetryPolicy};

#[derive(Serialize)]
struct ExtractRequest<'a> {
    reviews: Vec<ExtractItem<'a>>,
}

#[derive(Serialize)]
struct ExtractItem<'a> {
    id: &'a str,
    text: &'a str,
}

#[derive(Debug, Clone, PartialEq, Eq, Deserialize)]
pub struct ExtractedFeature {
    pub review_id: String,
    pub text: String,
}

#[derive(Debug, Deserialize)]
struct ExtractResponse {
    features: Vec<ExtractedFeature>,
}

/// Decode an extractor response body.
pub fn parse_extract_response(body: &str) -> Result<Vec<ExtractedFeature>, String> {
    serde_json::from_str::<ExtractResponse>(body)
        .map(|r| r.features)
        .map_err(|e| e.to_string())
}

#[derive(Debug, Clone, PartialEq)]
pub struct FailedBatch {
    pub review_ids: Vec<String>,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExtractionOutcome {
    /// Deduplicated per review, so per-review lists survive for scoring.
    pub features: FeatureSet,
    pub failed: Vec<FailedBatch>,
    pub diagnostics: Vec<String>,
}

impl ExtractionOutcome {
    pub fn is_complete(&self) -> bool {
        self.failed.is_empty()
    }
}

pub struct ExtractorClient {
    endpoint: String,
    source: Source,
    batch_size: usize,
    client: JsonClient,
}

impl ExtractorClient {
    pub fn new(endpoint: impl Into<String>, source: Source, retry: RetryPolicy) -> Self {
        Self {
            endpoint: endpoint.into(),
            source,
            batch_size: 32,
            client: JsonClient::new(retry, None, Duration::from_secs(60)),
        }
    }

    pub fn with_batch_size(mut self, n: usize) -> Self {
        self.batch_size = n.max(1);
        self
    }

    /// Send reviews in batches and collect whatever comes back.
    ///
    /// A batch that still fails after retries is reported in
    /// [`ExtractionOutcome::failed`]; a batch whose response cannot be decoded
    /// is skipped with a diagnostic. Neither aborts the run.
    pub fn fetch(&self, reviews: &[Review]) -> ExtractionOutcome {
        let mut features = FeatureSet::new(DedupScope::Review);
        let mut failed = Vec::new();
        let mut diagnostics = Vec::new();

        for (b, batch) in reviews.chunks(self.batch_size).enumerate() {
            let req = ExtractRequest {
                reviews: batch
                    .iter()
                    .map(|r| ExtractItem {
                        id: &r.review_id,
                        text: &r.body,
                    })
                    .collect(),
            };
            let ids: Vec<String> = batch.iter().map(|r| r.review_id.clone()).collect();
            match self.client.post_json(&self.endpoint, &req, parse_extract_response) {
                Ok(items) => {
                    let known: HashSet<&str> = ids.iter().map(String::as_str).collect();
                    for item in items {
                        if !known.contains(item.review_id.as_str()) {
                            diagnostics.push(format!(
                                "batch {b}: feature for unknown review {:?} ignored",
                                item.review_id
                            ));
                            continue;
                        }
                        match Feature::new(&item.text, item.review_id, self.source) {
                            Ok(f) => {
                                features.insert(f, 1);
                            }
                            Err(e) => diagnostics.push(format!("batch {b}: {e}")),
                        }
                    }
                }
                Err(e) if e.is_malformed() => {
                    diagnostics.push(format!("batch {b} skipped: {e}"));
                }
                Err(e) => failed.push(FailedBatch {
                    review_ids: ids,
                    reason: e.to_string(),
                }),
            }
        }
        ExtractionOutcome {
            features,
            failed,
            diagnostics,
        }
    }
}
