//! Per-topic triple counts with relation breakdowns.

use std::collections::HashMap;
use std::fmt;

use serde::Serialize;

use super::taxonomy::TopicType;
use super::triple::{KnowledgeBase, Relation};

#[derive(Debug, Clone, Serialize)]
pub struct TopicStats {
    pub topic: String,
    pub topic_type: TopicType,
    pub total: usize,
    pub supports: usize,
    pub undermines: usize,
    pub aligns_with: usize,
}

/// One row per taxonomy topic, in taxonomy order, plus grand totals.
/// Triples naming unknown topics are counted separately so the row sums
/// still reconcile with the triple list.
#[derive(Debug, Clone, Serialize)]
pub struct StatsTable {
    pub rows: Vec<TopicStats>,
    pub total_triples: usize,
    pub supports: usize,
    pub undermines: usize,
    pub aligns_with: usize,
    pub unique_concepts: usize,
    pub unknown_topic_triples: usize,
}

/// Tallies the KB per topic. Pure and order-insensitive: permuting the
/// triple list leaves the table unchanged.
pub fn kb_stats(kb: &KnowledgeBase) -> StatsTable {
    let tax = kb.taxonomy();
    let mut rows: Vec<TopicStats> = tax
        .topics()
        .iter()
        .map(|t| TopicStats {
            topic: t.name.clone(),
            topic_type: t.topic_type,
            total: 0,
            supports: 0,
            undermines: 0,
            aligns_with: 0,
        })
        .collect();
    let index: HashMap<String, usize> = rows
        .iter()
        .enumerate()
        .map(|(i, r)| (r.topic.to_lowercase(), i))
        .collect();

    let mut unknown = 0usize;
    let mut supports = 0usize;
    let mut undermines = 0usize;
    let mut aligns_with = 0usize;
    for t in kb.triples() {
        let Some(&i) = index.get(&t.topic.trim().to_lowercase()) else {
            unknown += 1;
            continue;
        };
        let row = &mut rows[i];
        row.total += 1;
        match t.relation {
            Relation::Supports => {
                row.supports += 1;
                supports += 1;
            }
            Relation::Undermines => {
                row.undermines += 1;
                undermines += 1;
            }
            Relation::AlignsWith => {
                row.aligns_with += 1;
                aligns_with += 1;
            }
        }
    }

    StatsTable {
        rows,
        total_triples: kb.len(),
        supports,
        undermines,
        aligns_with,
        unique_concepts: kb.unique_concept_count(),
        unknown_topic_triples: unknown,
    }
}

impl StatsTable {
    /// Tab-separated rendering: header, one row per topic, totals row.
    pub fn to_tsv(&self) -> String {
        let mut out = String::from("topic\ttopic_type\ttotal\tsupports\tundermines\taligns_with\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{}\t{}\t{}\t{}\t{}\t{}\n",
                r.topic, r.topic_type, r.total, r.supports, r.undermines, r.aligns_with
            ));
        }
        out.push_str(&format!(
            "TOTAL\t-\t{}\t{}\t{}\t{}\n",
            self.total_triples, self.supports, self.undermines, self.aligns_with
        ));
        out.push_str(&format!("# unique concepts\t{}\n", self.unique_concepts));
        if self.unknown_topic_triples > 0 {
            out.push_str(&format!(
                "# triples with unknown topics\t{}\n",
                self.unknown_topic_triples
            ));
        }
        out
    }
}

impl fmt::Display for StatsTable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_tsv())
    }
}
