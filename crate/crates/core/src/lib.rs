//! Feature clustering and semantic tagging for app-review mining.
//!
//! The crate is organised as a three-stage pipeline plus an evaluation
//! harness:
//!
//! 1. [`corpus`]: review cleaning, feature normalisation, deduplication and
//!    hybrid (union) merging of feature sets from several extractors.
//! 2. [`embed`] and [`cluster`]: unit-vector embeddings, cosine affinity,
//!    average-linkage dendrogram and an auto-tuned threshold sweep that scores
//!    each cut by silhouette, Davies-Bouldin and a composite.
//! 3. [`select`] and [`taxonomy`]: candidate selection, per-cluster
//!    mini-taxonomies with generated labels, and similarity-gated merging.
//!
//! [`eval`] scores extraction correctness (n-slack matching, P/R/F-beta) and
//! builds the quality report; [`pipeline`] wires every stage to files on disk.

pub mod cluster;
pub mod corpus;
pub mod embed;
pub mod error;
pub mod eval;
pub mod http;
pub mod pipeline;
pub mod select;
pub mod taxonomy;

mod float_repr;

pub use error::{Error, Result};
