//! Extraction correctness (n-slack matching, micro-averaged P/R/F-beta) and
//! the run quality report.

mod report;

pub use report::{quality_report, CandidateRow, CorrectnessRow, QualityReport, ReportInputs, SelectionRow, TaxonomyRow, TopCluster};

use std::collections::{BTreeMap, HashSet};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::io::read_text;
use crate::corpus::{Feature, Source};
use crate::{Error, Result};

pub const DEFAULT_BETA: f64 = 2.385;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvalConfig {
    pub beta: f64,
    pub n_slack: Vec<usize>,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            beta: DEFAULT_BETA,
            n_slack: vec![0, 1, 2],
        }
    }
}

impl EvalConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.beta.is_finite() && self.beta > 0.0) {
            return Err(Error::Config(format!("beta must be positive, got {}", self.beta)));
        }
        if self.n_slack.is_empty() {
            return Err(Error::Config("at least one n_slack value is needed".into()));
        }
        Ok(())
    }
}

/// True when one token sequence occurs contiguously inside the other and the
/// lengths differ by at most `n_slack` tokens.
pub fn features_match(p: &[String], g: &[String], n_slack: usize) -> bool {
    if p.is_empty() || g.is_empty() || p.len().abs_diff(g.len()) > n_slack {
        return false;
    }
    let (short, long) = if p.len() <= g.len() { (p, g) } else { (g, p) };
    long.windows(short.len()).any(|w| {
        w.iter()
            .zip(short)
            .all(|(a, b)| a == b || a.to_lowercase() == b.to_lowercase())
    })
}

/// One-to-one alignment within a review with the largest number of pairs.
///
/// Predicted features are visited in order; each first tries the gold
/// features in order and, when all its candidates are taken, tries to
/// reroute an earlier pair along an augmenting path (Kuhn). Returns
/// `(predicted, gold)` index pairs sorted by predicted index.
pub fn align_review(predicted: &[Feature], gold: &[Feature], n_slack: usize) -> Vec<(usize, usize)> {
    let adj: Vec<Vec<usize>> = predicted
        .iter()
        .map(|p| {
            (0..gold.len())
                .filter(|&gi| features_match(p.tokens(), gold[gi].tokens(), n_slack))
                .collect()
        })
        .collect();
    // owner[gi] = predicted index holding gold gi
    let mut owner: Vec<Option<usize>> = vec![None; gold.len()];
    for pi in 0..predicted.len() {
        if adj[pi].is_empty() {
            continue;
        }
        let mut seen = vec![false; gold.len()];
        augment(pi, &adj, &mut owner, &mut seen);
    }
    let mut pairs: Vec<(usize, usize)> = owner
        .iter()
        .enumerate()
        .filter_map(|(gi, o)| o.map(|pi| (pi, gi)))
        .collect();
    pairs.sort_unstable();
    pairs
}

/// Iterative augmenting-path search from predicted `start`.
fn augment(start: usize, adj: &[Vec<usize>], owner: &mut [Option<usize>], seen: &mut [bool]) -> bool {
    // Stack of (predicted, next candidate position, gold reached via).
    let mut stack: Vec<(usize, usize, Option<usize>)> = vec![(start, 0, None)];
    while let Some(top) = stack.last_mut() {
        let (pi, pos) = (top.0, top.1);
        if pos == adj[pi].len() {
            stack.pop();
            continue;
        }
        top.1 += 1;
        let gi = adj[pi][pos];
        if seen[gi] {
            continue;
        }
        seen[gi] = true;
        match owner[gi] {
            None => {
                // Flip every edge on the path.
                let mut g = gi;
                while let Some((p, _, via)) = stack.pop() {
                    owner[g] = Some(p);
                    match via {
                        Some(prev) => g = prev,
                        None => break,
                    }
                }
                return true;
            }
            Some(other) => stack.push((other, 0, Some(gi))),
        }
    }
    false
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prf {
    pub precision: f64,
    pub recall: f64,
    pub f_beta: f64,
}

/// `(1 + b^2) P R / (b^2 P + R)`, or 0 when `P = R = 0`.
pub fn f_beta(precision: f64, recall: f64, beta: f64) -> f64 {
    let b2 = beta * beta;
    let denom = b2 * precision + recall;
    if denom == 0.0 {
        0.0
    } else {
        (1.0 + b2) * precision * recall / denom
    }
}

/// Precision, recall and F-beta from counts; empty denominators give 0.
pub fn prf(matched: usize, predicted_total: usize, gold_total: usize, beta: f64) -> Prf {
    let ratio = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
    let (precision, recall) = (ratio(matched, predicted_total), ratio(matched, gold_total));
    Prf {
        precision,
        recall,
        f_beta: f_beta(precision, recall, beta),
    }
}

/// Gold features of one review, in file order (duplicates kept).
#[derive(Debug, Clone, PartialEq)]
pub struct GoldReview {
    pub review_id: String,
    pub features: Vec<Feature>,
}

#[derive(Deserialize)]
struct GoldLine {
    review_id: String,
    features: Vec<String>,
}

/// Parse gold JSONL `{"review_id", "features": [...]}`. Features that are
/// empty after normalisation are dropped with a warning.
pub fn parse_gold_jsonl(text: &str) -> Result<Vec<GoldReview>> {
    let mut out = Vec::new();
    let mut seen = HashSet::new();
    for (i, l) in text.lines().enumerate() {
        let l = l.trim();
        if l.is_empty() {
            continue;
        }
        let err = |msg: String| Error::Parse {
            what: "gold annotations",
            line: i + 1,
            msg,
        };
        let rec: GoldLine = serde_json::from_str(l).map_err(|e| err(e.to_string()))?;
        if rec.review_id.is_empty() {
            return Err(err("empty review_id".into()));
        }
        if !seen.insert(rec.review_id.clone()) {
            return Err(err(format!("duplicate review_id {:?}", rec.review_id)));
        }
        let mut features = Vec::with_capacity(rec.features.len());
        for raw in &rec.features {
            match Feature::new(raw, rec.review_id.as_str(), Source::Gold) {
                Ok(f) => features.push(f),
                Err(_) => log::warn!("line {}: gold feature {raw:?} is empty after normalisation", i + 1),
            }
        }
        out.push(GoldReview {
            review_id: rec.review_id,
            features,
        });
    }
    Ok(out)
}

pub fn read_gold(path: &Path) -> Result<Vec<GoldReview>> {
    parse_gold_jsonl(&read_text(path)?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReviewMatches {
    pub review_id: String,
    pub predicted: usize,
    pub gold: usize,
    /// Matched (predicted surface, gold surface) pairs.
    pub matches: Vec<(String, String)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub n_slack: usize,
    pub beta: f64,
    pub matched: usize,
    pub predicted_total: usize,
    pub gold_total: usize,
    pub precision: f64,
    pub recall: f64,
    pub f_beta: f64,
    pub reviews: Vec<ReviewMatches>,
}

/// Micro-averaged scores over the annotated reviews.
///
/// The gold file defines the evaluation set: predictions for reviews without
/// a gold entry are not counted.
pub fn evaluate(predicted: &BTreeMap<String, Vec<Feature>>, gold: &[GoldReview], n_slack: usize, beta: f64) -> EvalReport {
    let empty = Vec::new();
    let reviews: Vec<ReviewMatches> = gold
        .par_iter()
        .map(|g| {
            let p = predicted.get(&g.review_id).unwrap_or(&empty);
            let pairs = align_review(p, &g.features, n_slack);
            ReviewMatches {
                review_id: g.review_id.clone(),
                predicted: p.len(),
                gold: g.features.len(),
                matches: pairs
                    .into_iter()
                    .map(|(pi, gi)| (p[pi].surface().to_string(), g.features[gi].surface().to_string()))
                    .collect(),
            }
        })
        .collect();
    let matched = reviews.iter().map(|r| r.matches.len()).sum();
    let predicted_total = reviews.iter().map(|r| r.predicted).sum();
    let gold_total = reviews.iter().map(|r| r.gold).sum();
    let s = prf(matched, predicted_total, gold_total, beta);
    EvalReport {
        n_slack,
        beta,
        matched,
        predicted_total,
        gold_total,
        precision: s.precision,
        recall: s.recall,
        f_beta: s.f_beta,
        reviews,
    }
}

/// One report per configured slack value.
pub fn evaluate_all(predicted: &BTreeMap<String, Vec<Feature>>, gold: &[GoldReview], config: &EvalConfig) -> Result<Vec<EvalReport>> {
    config.validate()?;
    Ok(config
        .n_slack
        .iter()
        .map(|&n| evaluate(predicted, gold, n, config.beta))
        .collect())
}

/// Aligned text table with P, R and F per slack value.
pub fn eval_table(reports: &[EvalReport]) -> String {
    let mut s = format!("{:<8} {:>9} {:>9} {:>9} {:>8} {:>9} {:>6}\n", "n_slack", "precision", "recall", "f_beta", "matched", "predicted", "gold");
    for r in reports {
        s.push_str(&format!(
            "{:<8} {:>9.3} {:>9.3} {:>9.3} {:>8} {:>9} {:>6}\n",
            r.n_slack, r.precision, r.recall, r.f_beta, r.matched, r.predicted_total, r.gold_total
        ));
    }
    s
}
