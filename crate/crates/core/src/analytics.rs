//! Aggregates matcher output into topic-frequency reports. Only `supports`
//! triples attribute a match to a topic; one match counts once per distinct
//! supported topic of its concept.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::Serialize;

use crate::kb::{Concept, KnowledgeBase, Relation};
use crate::matcher::MatchResult;

pub const DEFAULT_TOP_CONCEPTS: usize = 10;

#[derive(Debug, thiserror::Error)]
pub enum AnalyticsError {
    #[error("unknown topic `{0}`")]
    UnknownTopic(String),
    #[error("failed to write report: {0}")]
    Io(#[from] std::io::Error),
    #[error("failed to encode report: {0}")]
    Encode(#[from] serde_json::Error),
}

/// Frequency row for one taxonomy topic.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TopicCount {
    pub name: String,
    #[serde(rename = "type")]
    pub topic_type: String,
    pub parent: Option<String>,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ConceptCount {
    pub concept: String,
    pub count: usize,
}

/// Full analysis report. Field order is fixed; serialization is
/// byte-for-byte reproducible for the same input.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Report {
    pub topics: Vec<TopicCount>,
    /// Matches whose concept has no supports triple in the KB.
    pub unattributed: usize,
    pub top_concepts: BTreeMap<String, Vec<ConceptCount>>,
}

/// Distinct supported topics per concept, canonical names. Topics missing
/// from the taxonomy are skipped with a warning; validation reports them
/// separately.
fn supported_topics(kb: &KnowledgeBase) -> HashMap<Concept, BTreeSet<String>> {
    let mut map: HashMap<Concept, BTreeSet<String>> = HashMap::new();
    for triple in kb.triples() {
        if triple.relation != Relation::Supports {
            continue;
        }
        match kb.taxonomy().canonical_name(&triple.topic) {
            Some(canon) => {
                map.entry(triple.concept.clone())
                    .or_default()
                    .insert(canon.to_string());
            }
            None => log::warn!(
                "supports triple for `{}` names unknown topic `{}`; not counted",
                triple.concept,
                triple.topic
            ),
        }
    }
    map
}

/// Counts matches per topic. Every taxonomy topic appears in the result,
/// zero or not, in taxonomy order; the second value is the unattributed
/// match count.
pub fn topic_frequencies(matches: &[MatchResult], kb: &KnowledgeBase) -> (Vec<TopicCount>, usize) {
    let supported = supported_topics(kb);
    let mut counts: HashMap<&str, usize> = HashMap::new();
    let mut unattributed = 0usize;
    for m in matches {
        match supported.get(&m.concept) {
            Some(topics) if !topics.is_empty() => {
                for topic in topics {
                    *counts.entry(topic.as_str()).or_default() += 1;
                }
            }
            _ => unattributed += 1,
        }
    }
    let rows = kb
        .taxonomy()
        .topics()
        .iter()
        .map(|t| TopicCount {
            name: t.name.clone(),
            topic_type: t.topic_type.as_str().to_string(),
            parent: t.parent.clone(),
            count: counts.get(t.name.as_str()).copied().unwrap_or(0),
        })
        .collect();
    (rows, unattributed)
}

/// Concepts supporting `topic`, ranked by match count descending, ties
/// broken lexicographically, at most `n` rows.
pub fn top_concepts(
    matches: &[MatchResult],
    kb: &KnowledgeBase,
    topic: &str,
    n: usize,
) -> Result<Vec<ConceptCount>, AnalyticsError> {
    let canon = kb
        .taxonomy()
        .canonical_name(topic)
        .ok_or_else(|| AnalyticsError::UnknownTopic(topic.to_string()))?
        .to_string();
    let supported = supported_topics(kb);
    let mut counts: BTreeMap<&Concept, usize> = BTreeMap::new();
    for m in matches {
        let Some((concept, topics)) = supported.get_key_value(&m.concept) else {
            continue;
        };
        if topics.contains(&canon) {
            *counts.entry(concept).or_default() += 1;
        }
    }
    let mut rows: Vec<ConceptCount> = counts
        .into_iter()
        .map(|(concept, count)| ConceptCount {
            concept: concept.text().to_string(),
            count,
        })
        .collect();
    rows.sort_by(|a, b| {
        b.count
            .cmp(&a.count)
            .then_with(|| a.concept.cmp(&b.concept))
    });
    rows.truncate(n);
    Ok(rows)
}

/// Builds the full report: all topic frequencies plus, for every topic
/// with at least one match, its top `n` concepts.
pub fn build_report(
    matches: &[MatchResult],
    kb: &KnowledgeBase,
    n: usize,
) -> Result<Report, AnalyticsError> {
    let (topics, unattributed) = topic_frequencies(matches, kb);
    let mut top = BTreeMap::new();
    for row in topics.iter().filter(|r| r.count > 0) {
        top.insert(row.name.clone(), top_concepts(matches, kb, &row.name, n)?);
    }
    Ok(Report {
        topics,
        unattributed,
        top_concepts: top,
    })
}

impl Report {
    pub fn to_json(&self) -> Result<String, AnalyticsError> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    /// `topic,parent,count` rows in taxonomy order, then the unattributed
    /// bucket. Taxonomy names contain no commas or quotes, so no escaping.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("topic,parent,count\n");
        for row in &self.topics {
            out.push_str(&format!(
                "{},{},{}\n",
                row.name,
                row.parent.as_deref().unwrap_or(""),
                row.count
            ));
        }
        out.push_str(&format!("unattributed,,{}\n", self.unattributed));
        out
    }
}
