//! Cluster labels: a chat-completion backend with few-shot prompting and a
//! deterministic token-frequency stub.

use std::collections::HashMap;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::{NodeKind, TaxonomyNode};
use crate::http::{JsonClient, RetryPolicy};
use crate::{Error, Result};

const STOPWORDS: &[&str] = &[
    "a", "an", "and", "app", "are", "as", "at", "be", "by", "for", "from", "in", "into", "is", "it", "its", "my",
    "of", "on", "or", "the", "this", "to", "with", "your",
];

/// The two most frequent content tokens across `surfaces` (ties broken
/// alphabetically), joined by a space. Falls back to stopwords when nothing
/// else is left, and to `"features"` for an empty input.
pub fn stub_label(surfaces: &[&str]) -> String {
    let mut counts: HashMap<&str, usize> = HashMap::new();
    for s in surfaces {
        for tok in s.split_whitespace() {
            *counts.entry(tok).or_default() += 1;
        }
    }
    let mut ranked: Vec<(&str, usize)> = counts.into_iter().collect();
    ranked.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(b.0)));
    let content: Vec<&str> = ranked
        .iter()
        .map(|(t, _)| *t)
        .filter(|t| !STOPWORDS.contains(t))
        .take(2)
        .collect();
    let picked = if content.is_empty() {
        ranked.iter().map(|(t, _)| *t).take(2).collect()
    } else {
        content
    };
    if picked.is_empty() {
        "features".to_string()
    } else {
        picked.join(" ")
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LabelerMode {
    RemoteLlm,
    #[default]
    DeterministicStub,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FewShot {
    pub features: Vec<String>,
    pub label: String,
}

fn default_few_shot() -> Vec<FewShot> {
    let ex = |features: &[&str], label: &str| FewShot {
        features: features.iter().map(|s| s.to_string()).collect(),
        label: label.to_string(),
    };
    vec![
        ex(&["generate images", "image style", "art creation", "edit picture"], "image generation"),
        ex(&["voice input", "speech recognition", "read aloud"], "voice interaction"),
        ex(&["translate text", "language support", "translation accuracy"], "language translation"),
        ex(&["chat history", "save conversation", "search past chats"], "conversation history"),
    ]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LabelerConfig {
    pub mode: LabelerMode,
    pub endpoint: Option<String>,
    pub model: String,
    pub system_prompt: String,
    /// User turn; `{features}` is replaced by the comma-separated members.
    pub prompt_template: String,
    pub few_shot: Vec<FewShot>,
    pub max_label_tokens: usize,
    pub temperature: f64,
    /// Members listed in one prompt; larger clusters are truncated.
    pub max_prompt_features: usize,
    pub min_subtree_size: usize,
    pub max_in_flight: usize,
}

impl Default for LabelerConfig {
    fn default() -> Self {
        Self {
            mode: LabelerMode::DeterministicStub,
            endpoint: None,
            model: "gpt-4o-mini".into(),
            system_prompt: "You name groups of mobile-app features with a 1-4 word category. \
                            Answer with the category name only."
                .into(),
            prompt_template: "Features: {features}".into(),
            few_shot: default_few_shot(),
            max_label_tokens: 6,
            temperature: 0.0,
            max_prompt_features: 50,
            min_subtree_size: super::DEFAULT_MIN_SUBTREE_SIZE,
            max_in_flight: 4,
        }
    }
}

impl LabelerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_label_tokens == 0 || self.max_prompt_features == 0 || self.max_in_flight == 0 {
            return Err(Error::Config("labeler limits must be positive".into()));
        }
        if !self.prompt_template.contains("{features}") {
            return Err(Error::Config("prompt template needs a {features} slot".into()));
        }
        if self.mode == LabelerMode::RemoteLlm {
            if self.few_shot.is_empty() {
                return Err(Error::Config("remote labeler needs at least one few-shot example".into()));
            }
            if self.endpoint.as_deref().is_none_or(str::is_empty) {
                return Err(Error::Config("remote labeler needs an endpoint".into()));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelOutcome {
    pub label: String,
    /// Set when the backend failed and the stub label was used instead.
    pub fallback: Option<String>,
}

pub trait Labeler: Send + Sync {
    fn tag(&self) -> String;
    fn label(&self, surfaces: &[&str]) -> LabelOutcome;
}

#[derive(Debug, Clone, Copy, Default)]
pub struct StubLabeler;

impl Labeler for StubLabeler {
    fn tag(&self) -> String {
        "stub-top2".into()
    }

    fn label(&self, surfaces: &[&str]) -> LabelOutcome {
        LabelOutcome {
            label: stub_label(surfaces),
            fallback: None,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Eq)]
pub struct ChatMessage {
    pub role: String,
    pub content: String,
}

#[derive(Serialize)]
struct ChatRequest<'a> {
    model: &'a str,
    messages: &'a [ChatMessage],
    temperature: f64,
}

#[derive(Deserialize)]
struct ChatResponse {
    choices: Vec<ChatChoice>,
}

#[derive(Deserialize)]
struct ChatChoice {
    message: ReplyMessage,
}

#[derive(Deserialize)]
struct ReplyMessage {
    content: String,
}

/// Content of the first choice of a chat-completion response.
pub fn parse_chat_response(body: &str) -> Result<String, String> {
    let resp: ChatResponse = serde_json::from_str(body).map_err(|e| e.to_string())?;
    resp.choices
        .into_iter()
        .next()
        .map(|c| c.message.content)
        .ok_or_else(|| "response has no choices".to_string())
}

/// First non-empty line, without a `label:`-style prefix or surrounding
/// quotes and punctuation, lowercased and cut to `max_tokens` words.
pub fn clean_label(raw: &str, max_tokens: usize) -> Option<String> {
    let line = raw.lines().map(str::trim).find(|l| !l.is_empty())?;
    let lower = line.to_lowercase();
    let mut s = lower.as_str();
    for prefix in ["label:", "category:"] {
        if let Some(rest) = s.strip_prefix(prefix) {
            s = rest;
        }
    }
    let s = s.trim_matches(|c: char| c.is_whitespace() || "\"'`*.:;,!".contains(c));
    let words: Vec<&str> = s.split_whitespace().take(max_tokens).collect();
    (!words.is_empty()).then(|| words.join(" "))
}

pub struct ChatLabeler {
    endpoint: String,
    config: LabelerConfig,
    client: JsonClient,
}

impl ChatLabeler {
    pub fn new(config: &LabelerConfig, api_key: Option<String>, retry: RetryPolicy) -> Result<Self> {
        let mut checked = config.clone();
        checked.mode = LabelerMode::RemoteLlm;
        checked.validate()?;
        Ok(Self {
            endpoint: checked.endpoint.clone().expect("validated"),
            config: checked,
            client: JsonClient::new(retry, api_key, Duration::from_secs(60)),
        })
    }

    fn user_turn(&self, features: &[&str]) -> String {
        let shown = &features[..features.len().min(self.config.max_prompt_features)];
        self.config.prompt_template.replace("{features}", &shown.join(", "))
    }

    /// System instruction, one user/assistant pair per few-shot example,
    /// then the member list.
    pub fn messages(&self, surfaces: &[&str]) -> Vec<ChatMessage> {
        let msg = |role: &str, content: String| ChatMessage {
            role: role.into(),
            content,
        };
        let mut out = vec![msg("system", self.config.system_prompt.clone())];
        for ex in &self.config.few_shot {
            let feats: Vec<&str> = ex.features.iter().map(String::as_str).collect();
            out.push(msg("user", self.user_turn(&feats)));
            out.push(msg("assistant", ex.label.clone()));
        }
        out.push(msg("user", self.user_turn(surfaces)));
        out
    }
}

impl Labeler for ChatLabeler {
    fn tag(&self) -> String {
        format!("chat:{}", self.config.model)
    }

    fn label(&self, surfaces: &[&str]) -> LabelOutcome {
        let messages = self.messages(surfaces);
        let req = ChatRequest {
            model: &self.config.model,
            messages: &messages,
            temperature: self.config.temperature,
        };
        let max = self.config.max_label_tokens;
        let reply = self.client.post_json(&self.endpoint, &req, parse_chat_response);
        let reason = match reply {
            Ok(text) => match clean_label(&text, max) {
                Some(label) => return LabelOutcome { label, fallback: None },
                None => "empty label in response".to_string(),
            },
            Err(e) => e.to_string(),
        };
        log::warn!("labeler fell back to stub label: {reason}");
        LabelOutcome {
            label: stub_label(surfaces),
            fallback: Some(reason),
        }
    }
}

pub fn label_cluster(surfaces: &[&str], labeler: &dyn Labeler) -> LabelOutcome {
    labeler.label(surfaces)
}

/// Label the root and every internal node with at least `min_subtree_size`
/// leaves through `labeler`; smaller internal nodes get the stub label.
/// Returns one diagnostic per fallback.
pub fn label_internal_nodes(node: &mut TaxonomyNode, labeler: &dyn Labeler, min_subtree_size: usize) -> Vec<String> {
    let mut diagnostics = Vec::new();
    let mut stack = vec![node];
    while let Some(n) = stack.pop() {
        if n.kind == NodeKind::Leaf {
            continue;
        }
        let leaves = n.leaves();
        if n.kind == NodeKind::Root || leaves.len() >= min_subtree_size {
            let out = labeler.label(&leaves);
            if let Some(reason) = out.fallback {
                diagnostics.push(format!("label fallback for {:?}: {reason}", out.label));
            }
            n.label = out.label;
        } else {
            n.label = stub_label(&leaves);
        }
        stack.extend(n.children.iter_mut());
    }
    diagnostics
}
