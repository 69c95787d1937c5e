//! Core library for building and deploying a structured ESG lexicon.
//!
//! The construction side turns dependency-parsed sustainability text into
//! knowledge triples (concept, relation, topic): concepts are extracted with
//! syntactic patterns, filtered by frequency, embedded and linked into a
//! similarity graph, seed concepts are selected per cluster and annotated,
//! and labels are propagated to the remaining concepts. The deployment side
//! matches concepts against report text and aggregates topic frequencies.

pub mod analytics;
pub mod annotate;
pub mod graph;
pub mod kb;
pub mod matcher;
pub mod metrics;
pub mod parser;
pub mod propagate;
pub mod seeds;

pub use kb::{Concept, KnowledgeBase, Relation, Taxonomy, Triple};
