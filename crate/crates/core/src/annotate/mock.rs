//! Deterministic in-process backend. Answers come from a fixed fixture
//! table over a small curated vocabulary, so every pipeline built on it is
//! bit-reproducible. Unknown phrases reorder to themselves, fail the
//! vocabulary check, and classify as Others / not applicable.

use std::collections::{HashMap, HashSet};
use std::sync::atomic::{AtomicUsize, Ordering};

use super::{AnnotateError, Annotator, Task, TaskKind};
use crate::kb::Concept;

/// concept, pillar, relation-topic ladder (topic names canonical)
const FIXTURES: &[(&str, &str, &[(&str, &str)])] = &[
    (
        "halve carbon emission",
        "Environmental",
        &[
            ("supports", "Emissions Control"),
            ("supports", "Climate Emissions"),
        ],
    ),
    (
        "involve workplace injury",
        "Governance",
        &[
            ("undermines", "Compliance"),
            ("undermines", "Worker & Consumer Safety"),
        ],
    ),
    (
        "build diverse workplace",
        "Social",
        &[
            ("supports", "Workplace"),
            ("supports", "Workplace Diversity"),
        ],
    ),
    (
        "minimise resource consumption",
        "Environmental",
        &[("supports", "Resource Optimisation")],
    ),
    (
        "organise charity event",
        "Social",
        &[("supports", "Outreach")],
    ),
    (
        "produce chemical waste",
        "Environmental",
        &[("undermines", "Operations")],
    ),
    (
        "improve workplace safety",
        "Social",
        &[
            ("supports", "Workplace"),
            ("supports", "Workplace Wellness"),
        ],
    ),
    (
        "adopt renewable energy",
        "Environmental",
        &[
            ("supports", "Resource Optimisation"),
            ("supports", "Renewable and Efficient Energy"),
        ],
    ),
    (
        "reduce water consumption",
        "Environmental",
        &[
            ("supports", "Resource Optimisation"),
            ("supports", "Water Conservation"),
        ],
    ),
    (
        "install solar panel",
        "Environmental",
        &[
            ("supports", "Development"),
            ("supports", "Green Infrastructure"),
            ("supports", "Resource Optimisation"),
            ("supports", "Renewable and Efficient Energy"),
        ],
    ),
    (
        "support local community",
        "Social",
        &[
            ("supports", "Outreach"),
            ("supports", "Community Empowerment"),
        ],
    ),
    (
        "train new employee",
        "Social",
        &[
            ("supports", "Workplace"),
            ("supports", "Workplace Development"),
        ],
    ),
    // bare verb-noun shorthands of the phrases above
    (
        "halve emission",
        "Environmental",
        &[
            ("supports", "Emissions Control"),
            ("supports", "Climate Emissions"),
        ],
    ),
    (
        "involve injury",
        "Governance",
        &[
            ("undermines", "Compliance"),
            ("undermines", "Worker & Consumer Safety"),
        ],
    ),
    (
        "build workplace",
        "Social",
        &[
            ("supports", "Workplace"),
            ("supports", "Workplace Diversity"),
        ],
    ),
    (
        "minimise consumption",
        "Environmental",
        &[("supports", "Resource Optimisation")],
    ),
    ("organise event", "Social", &[("supports", "Outreach")]),
    (
        "produce waste",
        "Environmental",
        &[("undermines", "Operations")],
    ),
    (
        "improve safety",
        "Social",
        &[
            ("supports", "Workplace"),
            ("supports", "Workplace Wellness"),
        ],
    ),
    (
        "adopt energy",
        "Environmental",
        &[
            ("supports", "Resource Optimisation"),
            ("supports", "Renewable and Efficient Energy"),
        ],
    ),
    (
        "reduce consumption",
        "Environmental",
        &[
            ("supports", "Resource Optimisation"),
            ("supports", "Water Conservation"),
        ],
    ),
    (
        "install panel",
        "Environmental",
        &[
            ("supports", "Development"),
            ("supports", "Green Infrastructure"),
            ("supports", "Resource Optimisation"),
            ("supports", "Renewable and Efficient Energy"),
        ],
    ),
    (
        "support community",
        "Social",
        &[
            ("supports", "Outreach"),
            ("supports", "Community Empowerment"),
        ],
    ),
    (
        "train employee",
        "Social",
        &[
            ("supports", "Workplace"),
            ("supports", "Workplace Development"),
        ],
    ),
];

/// incoherent orderings mapped to their repaired phrasing
const REORDERINGS: &[(&str, &str)] = &[
    ("emission carbon halve", "halve carbon emission"),
    ("panel solar install", "install solar panel"),
    ("consumption water reduce", "reduce water consumption"),
];

pub struct MockAnnotator {
    pillar: HashMap<&'static str, &'static str>,
    relations: HashMap<&'static str, &'static [(&'static str, &'static str)]>,
    reorder: HashMap<&'static str, &'static str>,
    vocabulary: HashSet<&'static str>,
    overrides: HashMap<(TaskKind, String), String>,
    calls: AtomicUsize,
}

impl MockAnnotator {
    pub fn new() -> MockAnnotator {
        let mut pillar = HashMap::new();
        let mut relations = HashMap::new();
        let mut vocabulary = HashSet::new();
        for (concept, p, rels) in FIXTURES {
            pillar.insert(*concept, *p);
            relations.insert(*concept, *rels);
            vocabulary.extend(concept.split_whitespace());
        }
        MockAnnotator {
            pillar,
            relations,
            reorder: REORDERINGS.iter().copied().collect(),
            vocabulary,
            overrides: HashMap::new(),
            calls: AtomicUsize::new(0),
        }
    }

    /// Forces a fixed response for one (task, input) pair; lets tests walk
    /// the guard and fallback paths.
    pub fn with_override(mut self, kind: TaskKind, input: &str, response: &str) -> MockAnnotator {
        self.overrides
            .insert((kind, input.to_string()), response.to_string());
        self
    }

    /// The concepts the fixture table covers, in table order.
    pub fn curated_concepts() -> Vec<Concept> {
        FIXTURES
            .iter()
            .map(|(c, _, _)| Concept::new(c).expect("fixture concepts are valid"))
            .collect()
    }

    /// Number of `complete` calls served so far.
    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::Relaxed)
    }

    fn answer(&self, task: &Task, input: &str) -> String {
        if let Some(forced) = self.overrides.get(&(task.kind, input.to_string())) {
            return forced.clone();
        }
        match task.kind {
            TaskKind::Reorder => self
                .reorder
                .get(input)
                .copied()
                .unwrap_or(input)
                .to_string(),
            TaskKind::Coherence => {
                let intelligible = input
                    .split_whitespace()
                    .all(|w| self.vocabulary.contains(w));
                if intelligible { "True" } else { "False" }.to_string()
            }
            TaskKind::Pillar => self
                .pillar
                .get(input)
                .copied()
                .unwrap_or("Others")
                .to_string(),
            TaskKind::RelationTopic => {
                let ladder = self.relations.get(input).copied().unwrap_or(&[]);
                for (relation, topic) in ladder {
                    let hit = task
                        .candidates
                        .iter()
                        .any(|c| c.eq_ignore_ascii_case(topic));
                    if hit {
                        return format!("({relation}, {topic})");
                    }
                }
                "not applicable".to_string()
            }
            TaskKind::EsgRelated => if self.relations.contains_key(input) {
                "ESG"
            } else {
                "non-ESG"
            }
            .to_string(),
            TaskKind::ActionOriented => if self.relations.contains_key(input) {
                "True"
            } else {
                "False"
            }
            .to_string(),
        }
    }
}

impl Default for MockAnnotator {
    fn default() -> Self {
        MockAnnotator::new()
    }
}

impl Annotator for MockAnnotator {
    fn complete(
        &self,
        task: &Task,
        inputs: &[String],
    ) -> Result<Vec<Option<String>>, AnnotateError> {
        self.calls.fetch_add(1, Ordering::Relaxed);
        Ok(inputs.iter().map(|i| Some(self.answer(task, i))).collect())
    }
}
