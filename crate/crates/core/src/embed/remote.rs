use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::EmbeddingProvider;
use crate::http::{JsonClient, RetryPolicy};
use crate::{Error, Result};

#[derive(Serialize)]
struct EmbeddingRequest<'a> {
    model: &'a str,
    input: &'a [String],
}

#[derive(Debug, Deserialize)]
struct EmbeddingResponse {
    data: Vec<EmbeddingItem>,
}

#[derive(Debug, Deserialize)]
struct EmbeddingItem {
    index: usize,
    embedding: Vec<f64>,
}

/// Decode an embeddings response into vectors ordered by `index`.
///
/// Every index in `0..expected` must appear exactly once.
pub fn parse_embedding_response(body: &str, expected: usize) -> Result<Vec<Vec<f64>>, String> {
    let resp: EmbeddingResponse = serde_json::from_str(body).map_err(|e| e.to_string())?;
    let mut out: Vec<Option<Vec<f64>>> = vec![None; expected];
    for item in resp.data {
        let slot = out
            .get_mut(item.index)
            .ok_or_else(|| format!("index {} out of range 0..{expected}", item.index))?;
        if slot.replace(item.embedding).is_some() {
            return Err(format!("index {} repeated", item.index));
        }
    }
    out.into_iter()
        .enumerate()
        .map(|(i, v)| v.ok_or_else(|| format!("index {i} missing")))
        .collect()
}

/// Embedding service speaking `{"model","input"}` → `{"data":[{"index","embedding"}]}`.
pub struct RemoteEmbedder {
    endpoint: String,
    model: String,
    client: JsonClient,
}

impl RemoteEmbedder {
    pub fn new(
        endpoint: impl Into<String>,
        model: impl Into<String>,
        api_key: Option<String>,
        retry: RetryPolicy,
    ) -> Self {
        Self {
            endpoint: endpoint.into(),
            model: model.into(),
            client: JsonClient::new(retry, api_key, Duration::from_secs(120)),
        }
    }
}

impl EmbeddingProvider for RemoteEmbedder {
    fn tag(&self) -> String {
        format!("remote:{}", self.model)
    }

    fn embed_batch(&self, texts: &[String]) -> Result<Vec<Vec<f64>>> {
        let req = EmbeddingRequest {
            model: &self.model,
            input: texts,
        };
        self.client
            .post_json(&self.endpoint, &req, |body| {
                parse_embedding_response(body, texts.len())
            })
            .map_err(Error::from)
    }
}
