//! Structural rule checks over a knowledge base.
//!
//! Four rules govern relations: each concept aligns with one pillar, holds at
//! most one relation per topic type, keeps sub topics consistent with its
//! broad topic (same for the cross levels), and may hold cross-level
//! relations only under the Environmental pillar. Triples naming topics
//! outside the taxonomy are reported separately rather than crashing the
//! checks. Absent labels are never flagged: a concept without a pillar triple
//! is incomplete, not invalid.

use std::collections::BTreeMap;
use std::fmt;

use super::concept::Concept;
use super::taxonomy::{Pillar, TopicType};
use super::triple::{KnowledgeBase, Relation, Triple};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum RuleId {
    /// aligns_with must target a pillar; supports/undermines must not.
    PillarAssignment,
    /// At most one relation with one topic within each topic type.
    SingleLabel,
    /// A sub (cross-sub) topic must be a child of the concept's broad
    /// (cross-broad) topic when the concept holds one.
    CrossLabelParentChild,
    /// Cross-broad and cross-sub relations require the Environmental pillar.
    CrossLabelEnvironmentalOnly,
    /// Triple references a topic absent from the taxonomy.
    UnknownTopic,
}

impl RuleId {
    pub fn as_str(self) -> &'static str {
        match self {
            RuleId::PillarAssignment => "Pillar Assignment",
            RuleId::SingleLabel => "Single Label within Topic Types",
            RuleId::CrossLabelParentChild => "Cross-Labels between Parent & Children",
            RuleId::CrossLabelEnvironmentalOnly => "Cross-Labels between Cross & Non-Cross",
            RuleId::UnknownTopic => "Unknown Topic",
        }
    }
}

impl fmt::Display for RuleId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One rule breach for one concept, with the triples that cause it.
#[derive(Debug, Clone)]
pub struct Violation {
    pub rule: RuleId,
    pub concept: Concept,
    pub triples: Vec<Triple>,
    pub detail: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}] {}: {}", self.rule, self.concept, self.detail)
    }
}

#[derive(Debug, Clone, Default)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_clean(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn len(&self) -> usize {
        self.violations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn by_rule(&self, rule: RuleId) -> impl Iterator<Item = &Violation> {
        self.violations.iter().filter(move |v| v.rule == rule)
    }
}

/// Checks every concept in the KB against the relation rules. The report is
/// empty exactly when all rules hold. Order is deterministic: concepts
/// alphabetically, rules in declaration order.
pub fn validate_triples(kb: &KnowledgeBase) -> ValidationReport {
    let tax = kb.taxonomy();
    let mut by_concept: BTreeMap<&str, Vec<&Triple>> = BTreeMap::new();
    for t in kb.triples() {
        by_concept.entry(t.concept.text()).or_default().push(t);
    }

    let mut report = ValidationReport::default();
    for (_, triples) in by_concept {
        let concept = triples[0].concept.clone();

        let mut unknown: Vec<Triple> = Vec::new();
        let mut known: Vec<&Triple> = Vec::new();
        for t in &triples {
            if tax.contains(&t.topic) {
                known.push(t);
            } else {
                unknown.push((*t).clone());
            }
        }
        if !unknown.is_empty() {
            let names: Vec<&str> = unknown.iter().map(|t| t.topic.as_str()).collect();
            report.violations.push(Violation {
                rule: RuleId::UnknownTopic,
                concept: concept.clone(),
                detail: format!("topic(s) not in taxonomy: {}", names.join(", ")),
                triples: unknown,
            });
        }

        // Relation/level pairing. Triples failing it are excluded from the
        // remaining checks so each defect surfaces under exactly one rule.
        let mut malformed: Vec<Triple> = Vec::new();
        let mut legal: Vec<&Triple> = Vec::new();
        for t in known {
            let tt = tax.get(&t.topic).unwrap().topic_type;
            let ok = match t.relation {
                Relation::AlignsWith => tt == TopicType::Pillar,
                Relation::Supports | Relation::Undermines => tt != TopicType::Pillar,
            };
            if ok {
                legal.push(t);
            } else {
                malformed.push(t.clone());
            }
        }
        if !malformed.is_empty() {
            let what: Vec<String> = malformed
                .iter()
                .map(|t| format!("{} -> {}", t.relation, t.topic))
                .collect();
            report.violations.push(Violation {
                rule: RuleId::PillarAssignment,
                concept: concept.clone(),
                detail: format!(
                    "aligns_with must target a pillar and supports/undermines a topic: {}",
                    what.join(", ")
                ),
                triples: malformed,
            });
        }

        let of_type = |tt: TopicType| -> Vec<&Triple> {
            legal
                .iter()
                .filter(|t| tax.get(&t.topic).unwrap().topic_type == tt)
                .copied()
                .collect()
        };

        for tt in TopicType::ALL {
            let group = of_type(tt);
            if group.len() > 1 {
                let names: Vec<&str> = group.iter().map(|t| t.topic.as_str()).collect();
                report.violations.push(Violation {
                    rule: RuleId::SingleLabel,
                    concept: concept.clone(),
                    detail: format!(
                        "{} relations within topic type {tt}: {}",
                        group.len(),
                        names.join(", ")
                    ),
                    triples: group.into_iter().cloned().collect(),
                });
            }
        }

        // Parent consistency, checked only when the parent level is
        // unambiguous (a duplicated parent level is already reported above).
        for (child_tt, parent_tt) in [
            (TopicType::Sub, TopicType::Broad),
            (TopicType::CrossSub, TopicType::CrossBroad),
        ] {
            let parents = of_type(parent_tt);
            if parents.len() != 1 {
                continue;
            }
            let parent_topic = tax.canonical_name(&parents[0].topic).unwrap();
            for child in of_type(child_tt) {
                let declared = tax.get(&child.topic).unwrap().parent.as_deref();
                if declared != Some(parent_topic) {
                    report.violations.push(Violation {
                        rule: RuleId::CrossLabelParentChild,
                        concept: concept.clone(),
                        detail: format!(
                            "{} `{}` is not a child of {} `{}`",
                            child_tt, child.topic, parent_tt, parent_topic
                        ),
                        triples: vec![parents[0].clone(), child.clone()],
                    });
                }
            }
        }

        // Cross-level relations are reserved for Environmental concepts.
        // Checked only when a pillar label is present.
        let pillars = of_type(TopicType::Pillar);
        if pillars.len() == 1 {
            let pillar: Pillar = pillars[0].topic.parse().expect("pillar topic name");
            if pillar != Pillar::Environmental {
                let cross: Vec<Triple> = legal
                    .iter()
                    .filter(|t| {
                        matches!(
                            tax.get(&t.topic).unwrap().topic_type,
                            TopicType::CrossBroad | TopicType::CrossSub
                        )
                    })
                    .map(|t| (*t).clone())
                    .collect();
                if !cross.is_empty() {
                    let names: Vec<&str> = cross.iter().map(|t| t.topic.as_str()).collect();
                    report.violations.push(Violation {
                        rule: RuleId::CrossLabelEnvironmentalOnly,
                        concept: concept.clone(),
                        detail: format!(
                            "cross-level topics ({}) under the {pillar} pillar",
                            names.join(", ")
                        ),
                        triples: cross,
                    });
                }
            }
        }
    }

    report
}
