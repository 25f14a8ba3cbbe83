//! Choosing one clustering out of the sweep.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::cluster::ClusteringCandidate;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    /// Highest silhouette.
    Silhouette,
    /// Silhouette and inverted DB, penalised by cluster count and size.
    #[default]
    Balanced,
    /// Fewest clusters whose silhouette is within a margin of the best.
    Conservative,
}

impl std::str::FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "silhouette" => Ok(Self::Silhouette),
            "balanced" => Ok(Self::Balanced),
            "conservative" => Ok(Self::Conservative),
            _ => Err(Error::Config(format!(
                "unknown strategy {s:?}; expected silhouette, balanced or conservative"
            ))),
        }
    }
}

/// What the balanced strategy's size penalty measures, as a fraction of n.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SizePenalty {
    #[default]
    MaxSize,
    /// Population standard deviation of cluster sizes.
    SizeStd,
    Singletons,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SelectionConfig {
    pub strategy: Strategy,
    pub alpha: f64,
    pub gamma: f64,
    pub stability_margin: f64,
    pub size_penalty: SizePenalty,
}

impl Default for SelectionConfig {
    fn default() -> Self {
        Self {
            strategy: Strategy::Balanced,
            alpha: 0.25,
            gamma: 0.25,
            stability_margin: 0.05,
            size_penalty: SizePenalty::MaxSize,
        }
    }
}

impl SelectionConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha >= 0.0 && self.gamma >= 0.0) {
            return Err(Error::Config("selection weights must be >= 0".into()));
        }
        if !(0.0..=1.0).contains(&self.stability_margin) {
            return Err(Error::Config("stability margin must lie in [0, 1]".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredCandidate {
    pub threshold: f64,
    pub k: usize,
    pub valid: bool,
    /// Strategy score; absent for invalid candidates. For the conservative
    /// strategy this is the silhouette, with `eligible` marking the band.
    pub score: Option<f64>,
    #[serde(default)]
    pub eligible: bool,
}

/// The chosen candidate plus how every candidate scored.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Selection {
    pub strategy: Strategy,
    pub config: SelectionConfig,
    pub chosen: usize,
    pub threshold: f64,
    pub k: usize,
    pub scores: Vec<ScoredCandidate>,
}

fn size_penalty(c: &ClusteringCandidate, kind: SizePenalty) -> f64 {
    let n = c.assignment.len() as f64;
    let sizes = c.sizes();
    match kind {
        SizePenalty::MaxSize => c.max_cluster_size as f64 / n,
        SizePenalty::SizeStd => {
            let mean = n / sizes.len() as f64;
            let var = sizes.iter().map(|&s| (s as f64 - mean).powi(2)).sum::<f64>() / sizes.len() as f64;
            var.sqrt() / n
        }
        SizePenalty::Singletons => sizes.iter().filter(|&&s| s == 1).count() as f64 / n,
    }
}

/// Balanced objective for one valid candidate.
pub fn balanced_score(c: &ClusteringCandidate, config: &SelectionConfig) -> Option<f64> {
    let (sil, db) = (c.silhouette?, c.davies_bouldin?);
    let n = c.assignment.len() as f64;
    Some((sil + 1.0) / 2.0 + 1.0 / (1.0 + db) - config.alpha * (c.k as f64 / n) - config.gamma * size_penalty(c, config.size_penalty))
}

/// Pick one candidate according to `config.strategy`.
///
/// Ties under the silhouette and balanced strategies go to lower k, then to
/// the lower threshold; the conservative strategy breaks ties on k towards
/// the higher threshold.
pub fn select(candidates: &[ClusteringCandidate], config: &SelectionConfig) -> Result<Selection> {
    config.validate()?;
    let valid: Vec<usize> = (0..candidates.len())
        .filter(|&i| candidates[i].valid && candidates[i].silhouette.is_some())
        .collect();
    if valid.is_empty() {
        return Err(Error::Selection("no valid candidate to choose from".into()));
    }

    let score = |c: &ClusteringCandidate| match config.strategy {
        Strategy::Silhouette | Strategy::Conservative => c.silhouette,
        Strategy::Balanced => balanced_score(c, config),
    };
    let best_sil = valid
        .iter()
        .filter_map(|&i| candidates[i].silhouette)
        .fold(f64::NEG_INFINITY, f64::max);
    let floor = best_sil - config.stability_margin;
    let eligible = |c: &ClusteringCandidate| match config.strategy {
        Strategy::Conservative => c.silhouette.is_some_and(|s| s >= floor),
        _ => c.valid,
    };

    let chosen = match config.strategy {
        Strategy::Silhouette | Strategy::Balanced => *valid
            .iter()
            .max_by(|&&i, &&j| {
                let (a, b) = (&candidates[i], &candidates[j]);
                score(a)
                    .partial_cmp(&score(b))
                    .unwrap_or(Ordering::Equal)
                    .then(b.k.cmp(&a.k))
                    .then(b.threshold.total_cmp(&a.threshold))
            })
            .expect("non-empty"),
        Strategy::Conservative => *valid
            .iter()
            .filter(|&&i| eligible(&candidates[i]))
            .min_by(|&&i, &&j| {
                let (a, b) = (&candidates[i], &candidates[j]);
                a.k.cmp(&b.k).then(b.threshold.total_cmp(&a.threshold))
            })
            .expect("the best candidate is always eligible"),
    };

    let scores = candidates
        .iter()
        .map(|c| ScoredCandidate {
            threshold: c.threshold,
            k: c.k,
            valid: c.valid,
            score: if c.valid { score(c) } else { None },
            eligible: c.valid && eligible(c),
        })
        .collect();
    Ok(Selection {
        strategy: config.strategy,
        config: *config,
        chosen,
        threshold: candidates[chosen].threshold,
        k: candidates[chosen].k,
        scores,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cand(threshold: f64, k: usize, sil: f64, db: f64) -> ClusteringCandidate {
        let n = 100;
        let assignment: Vec<usize> = (0..n).map(|i| i % k).collect();
        let max = n.div_ceil(k);
        ClusteringCandidate {
            threshold,
            k,
            valid: true,
            silhouette: Some(sil),
            silhouette_std: Some(0.0),
            davies_bouldin: Some(db),
            composite: None,
            max_cluster_size: max,
            assignment,
            diagnostics: vec![],
        }
    }

    fn cfg(strategy: Strategy) -> SelectionConfig {
        SelectionConfig {
            strategy,
            ..Default::default()
        }
    }

    #[test]
    fn single_valid_candidate_wins_everywhere() {
        let mut invalid = cand(0.1, 1, 0.0, 0.0);
        invalid.valid = false;
        invalid.silhouette = None;
        invalid.davies_bouldin = None;
        let cs = vec![invalid, cand(0.2, 5, 0.1, 2.0)];
        for s in [Strategy::Silhouette, Strategy::Balanced, Strategy::Conservative] {
            assert_eq!(select(&cs, &cfg(s)).unwrap().chosen, 1);
        }
    }

    #[test]
    fn silhouette_prefers_higher() {
        let cs = vec![cand(0.2, 5, 0.2, 1.0), cand(0.3, 5, 0.3, 1.0)];
        assert_eq!(select(&cs, &cfg(Strategy::Silhouette)).unwrap().chosen, 1);
    }

    #[test]
    fn conservative_versus_silhouette() {
        let cs = vec![cand(0.2, 40, 0.30, 1.0), cand(0.5, 10, 0.27, 1.0)];
        assert_eq!(select(&cs, &cfg(Strategy::Conservative)).unwrap().k, 10);
        assert_eq!(select(&cs, &cfg(Strategy::Silhouette)).unwrap().k, 40);
    }

    #[test]
    fn tie_chains() {
        let cs = vec![cand(0.2, 5, 0.3, 1.0), cand(0.3, 4, 0.3, 1.0), cand(0.4, 4, 0.3, 1.0)];
        assert_eq!(select(&cs, &cfg(Strategy::Silhouette)).unwrap().chosen, 1);
        assert_eq!(select(&cs, &cfg(Strategy::Conservative)).unwrap().chosen, 2);
    }

    #[test]
    fn balanced_formula() {
        let c = cand(0.2, 4, 0.5, 1.0);
        let want = 0.75 + 0.5 - 0.25 * 0.04 - 0.25 * 0.25;
        assert!((balanced_score(&c, &SelectionConfig::default()).unwrap() - want).abs() < 1e-12);
    }

    #[test]
    fn no_valid_candidates() {
        let mut c = cand(0.1, 1, 0.0, 0.0);
        c.valid = false;
        assert!(matches!(select(&[c], &SelectionConfig::default()), Err(Error::Selection(_))));
    }

    #[test]
    fn config_bounds() {
        let mut c = SelectionConfig::default();
        c.alpha = -1.0;
        assert!(c.validate().is_err());
        c.alpha = 0.0;
        c.stability_margin = 1.5;
        assert!(c.validate().is_err());
        assert_eq!("balanced".parse::<Strategy>().unwrap(), Strategy::Balanced);
        assert!("greedy".parse::<Strategy>().is_err());
    }
}
