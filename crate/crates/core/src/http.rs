//! Blocking JSON-over-HTTP client with bounded exponential backoff.
//!
//! Shared by the remote feature extractor, the remote embedding provider and
//! the chat-completion labeler. Transport errors, `429` and `5xx` responses are
//! retried; other statuses and undecodable bodies fail immediately.

use std::time::Duration;

use serde::de::DeserializeOwned;
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum HttpError {
    #[error("request to {url} failed after {attempts} attempt(s): {msg}")]
    Transport {
        url: String,
        attempts: u32,
        msg: String,
    },

    #[error("{url} answered with status {status}: {body}")]
    Status {
        url: String,
        status: u16,
        body: String,
    },

    #[error("malformed response from {url}: {msg}")]
    Malformed { url: String, msg: String },
}

impl HttpError {
    /// Whether the failure came from the response payload rather than the
    /// network or the server status.
    pub fn is_malformed(&self) -> bool {
        matches!(self, HttpError::Malformed { .. })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RetryPolicy {
    pub max_retries: u32,
    pub base_delay: Duration,
    pub max_delay: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self {
            max_retries: 3,
            base_delay: Duration::from_millis(250),
            max_delay: Duration::from_secs(8),
        }
    }
}

impl RetryPolicy {
    /// No retries and no sleeping; useful in tests.
    pub fn none() -> Self {
        Self {
            max_retries: 0,
            base_delay: Duration::ZERO,
            max_delay: Duration::ZERO,
        }
    }

    /// Delay before retry number `attempt` (1-based).
    pub fn delay(&self, attempt: u32) -> Duration {
        let factor = 1u32.checked_shl(attempt.saturating_sub(1)).unwrap_or(u32::MAX);
        self.base_delay.saturating_mul(factor).min(self.max_delay)
    }
}

#[derive(Debug, Clone)]
pub struct JsonClient {
    agent: ureq::Agent,
    retry: RetryPolicy,
    api_key: Option<String>,
}

impl JsonClient {
    pub fn new(retry: RetryPolicy, api_key: Option<String>, timeout: Duration) -> Self {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(timeout))
            .http_status_as_error(false)
            .build()
            .into();
        Self {
            agent,
            retry,
            api_key: api_key.filter(|k| !k.is_empty()),
        }
    }

    pub fn retry_policy(&self) -> RetryPolicy {
        self.retry
    }

    /// POST `body` as JSON and return the raw response text.
    pub fn post_raw<B: Serialize>(&self, url: &str, body: &B) -> Result<String, HttpError> {
        let payload = serde_json::to_string(body).map_err(|e| HttpError::Malformed {
            url: url.to_string(),
            msg: format!("request serialisation: {e}"),
        })?;

        let mut attempt = 0;
        loop {
            attempt += 1;
            let mut req = self
                .agent
                .post(url)
                .header("content-type", "application/json");
            if let Some(key) = &self.api_key {
                req = req.header("authorization", format!("Bearer {key}"));
            }

            let retryable = match req.send(payload.as_str()) {
                Ok(mut resp) => {
                    let status = resp.status().as_u16();
                    let text = resp.body_mut().read_to_string().unwrap_or_default();
                    if (200..300).contains(&status) {
                        return Ok(text);
                    }
                    let err = HttpError::Status {
                        url: url.to_string(),
                        status,
                        body: truncate(&text, 512),
                    };
                    if status == 429 || status >= 500 {
                        err
                    } else {
                        return Err(err);
                    }
                }
                Err(e) => HttpError::Transport {
                    url: url.to_string(),
                    attempts: attempt,
                    msg: e.to_string(),
                },
            };

            if attempt > self.retry.max_retries {
                return Err(match retryable {
                    HttpError::Transport { url, msg, .. } => HttpError::Transport {
                        url,
                        attempts: attempt,
                        msg,
                    },
                    other => other,
                });
            }
            let delay = self.retry.delay(attempt);
            log::debug!("retrying {url} in {delay:?} after: {retryable}");
            std::thread::sleep(delay);
        }
    }

    /// POST `body` and decode the JSON response with `parse`.
    pub fn post_json<B, R, F>(&self, url: &str, body: &B, parse: F) -> Result<R, HttpError>
    where
        B: Serialize,
        F: FnOnce(&str) -> Result<R, String>,
    {
        let text = self.post_raw(url, body)?;
        parse(&text).map_err(|msg| HttpError::Malformed {
            url: url.to_string(),
            msg,
        })
    }
}

/// Decode a JSON document, reporting serde's message on failure.
pub fn decode<T: DeserializeOwned>(text: &str) -> Result<T, String> {
    serde_json::from_str(text).map_err(|e| e.to_string())
}

fn truncate(s: &str, max: usize) -> String {
    match s.char_indices().nth(max) {
        Some((idx, _)) => format!("{}...", &s[..idx]),
        None => s.to_string(),
    }
}
