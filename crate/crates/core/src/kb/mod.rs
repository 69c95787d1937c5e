//! Knowledge base domain: concepts, taxonomy, triples, rule validation and
//! statistics.

pub mod concept;
pub mod stats;
pub mod taxonomy;
pub mod triple;
pub mod validate;

pub use concept::{Concept, ConceptError};
pub use stats::{kb_stats, StatsTable, TopicStats};
pub use taxonomy::{Pillar, Taxonomy, TaxonomyError, Topic, TopicType};
pub use triple::{KbError, KnowledgeBase, Polarity, Provenance, Relation, Triple, TripleError};
pub use validate::{validate_triples, RuleId, ValidationReport, Violation};
