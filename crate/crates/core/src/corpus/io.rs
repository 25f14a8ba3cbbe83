//! JSONL readers and writers for reviews and features.

use std::collections::HashSet;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Feature, FeatureSet, Review, Source};
use crate::{Error, Result};

/// One line of a features file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureRecord {
    pub surface: String,
    pub review_id: String,
    pub source: Source,
    #[serde(default = "one")]
    pub freq: u64,
}

fn one() -> u64 {
    1
}

#[derive(Debug, Default)]
pub struct ParsedFeatures {
    pub features: Vec<(Feature, u64)>,
    /// `(line, raw surface)` of records that normalised to nothing.
    pub rejected: Vec<(usize, String)>,
}

fn lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty())
}

/// Parse a reviews JSONL document; ids must be non-empty and unique and
/// bodies non-empty.
pub fn parse_reviews_jsonl(text: &str) -> Result<Vec<Review>> {
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for (line, l) in lines(text) {
        let parse_err = |msg: String| Error::Parse {
            what: "review",
            line,
            msg,
        };
        let r: Review = serde_json::from_str(l).map_err(|e| parse_err(e.to_string()))?;
        if r.review_id.is_empty() {
            return Err(parse_err("empty review_id".into()));
        }
        if r.body.trim().is_empty() {
            return Err(parse_err(format!("empty body for {}", r.review_id)));
        }
        if !seen.insert(r.review_id.clone()) {
            return Err(parse_err(format!("duplicate review_id {}", r.review_id)));
        }
        out.push(r);
    }
    Ok(out)
}

/// Parse a features JSONL document, normalising every surface.
pub fn parse_features_jsonl(text: &str) -> Result<ParsedFeatures> {
    let mut out = ParsedFeatures::default();
    for (line, l) in lines(text) {
        let rec: FeatureRecord = serde_json::from_str(l).map_err(|e| Error::Parse {
            what: "feature",
            line,
            msg: e.to_string(),
        })?;
        if rec.freq == 0 {
            return Err(Error::Parse {
                what: "feature",
                line,
                msg: "freq must be at least 1".into(),
            });
        }
        match Feature::new(&rec.surface, rec.review_id, rec.source) {
            Ok(f) => out.features.push((f, rec.freq)),
            Err(Error::RejectedFeature(raw)) => out.rejected.push((line, raw)),
            Err(e) => return Err(e),
        }
    }
    Ok(out)
}

pub(crate) fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

pub(crate) fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn read_reviews(path: &Path) -> Result<Vec<Review>> {
    parse_reviews_jsonl(&read_text(path)?)
}

pub fn read_features(path: &Path) -> Result<ParsedFeatures> {
    let parsed = parse_features_jsonl(&read_text(path)?)?;
    for (line, raw) in &parsed.rejected {
        log::warn!("{}:{line}: dropped feature {raw:?} (empty after normalisation)", path.display());
    }
    Ok(parsed)
}

pub fn write_reviews(path: &Path, reviews: &[Review]) -> Result<()> {
    let mut s = String::new();
    for r in reviews {
        s.push_str(&serde_json::to_string(r)?);
        s.push('\n');
    }
    write_text(path, &s)
}

pub fn write_features(path: &Path, set: &FeatureSet) -> Result<()> {
    let mut s = String::new();
    for (f, freq) in set.iter() {
        let rec = FeatureRecord {
            surface: f.surface().to_string(),
            review_id: f.review_id.clone(),
            source: f.source,
            freq,
        };
        let _ = writeln!(s, "{}", serde_json::to_string(&rec)?);
    }
    write_text(path, &s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::DedupScope;

    #[test]
    fn reviews_reject_duplicates_and_empty() {
        let ok = r#"{"review_id":"a","app_id":"x","body":"hi"}
{"review_id":"b","app_id":"x","body":"yo","submitted_at":"2025-07-17"}"#;
        let r = parse_reviews_jsonl(ok).unwrap();
        assert_eq!(r.len(), 2);
        assert_eq!(r[1].submitted_at.as_deref(), Some("2025-07-17"));

        let dup = r#"{"review_id":"a","app_id":"x","body":"hi"}
{"review_id":"a","app_id":"x","body":"again"}"#;
        assert!(matches!(parse_reviews_jsonl(dup), Err(Error::Parse { line: 2, .. })));

        let empty = r#"{"review_id":"a","app_id":"x","body":"  "}"#;
        assert!(parse_reviews_jsonl(empty).is_err());
        assert!(parse_reviews_jsonl("{not json").is_err());
    }

    #[test]
    fn features_round_trip_and_rejects() {
        let text = r#"{"surface":"Dark Mode","review_id":"r1","source":"syntactic","freq":2}
{"surface":"!!!","review_id":"r1","source":"llm"}
{"surface":"voice input","review_id":"r2","source":"llm"}"#;
        let parsed = parse_features_jsonl(text).unwrap();
        assert_eq!(parsed.rejected, vec![(2, "!!!".to_string())]);
        let set = FeatureSet::from_counted(parsed.features, DedupScope::Corpus);
        assert_eq!(set.frequency("dark mode"), Some(2));

        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("f.jsonl");
        write_features(&p, &set).unwrap();
        let again = FeatureSet::from_counted(read_features(&p).unwrap().features, DedupScope::Corpus);
        assert_eq!(again, set);
    }

    #[test]
    fn zero_freq_and_unknown_source_fail() {
        assert!(parse_features_jsonl(r#"{"surface":"a","review_id":"r","source":"llm","freq":0}"#).is_err());
        assert!(parse_features_jsonl(r#"{"surface":"a","review_id":"r","source":"magic"}"#).is_err());
    }
}
