//! Knowledge triples (concept, relation, topic) and the file-backed
//! knowledge base container.

use std::collections::HashSet;
use std::fmt;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::concept::{Concept, ConceptError};
use super::taxonomy::Taxonomy;

/// Relation between a concept and a topic. `aligns_with` targets pillars;
/// `supports` and `undermines` target non-pillar topics.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Relation {
    AlignsWith,
    Supports,
    Undermines,
}

impl Relation {
    pub fn as_str(self) -> &'static str {
        match self {
            Relation::AlignsWith => "aligns_with",
            Relation::Supports => "supports",
            Relation::Undermines => "undermines",
        }
    }
}

impl fmt::Display for Relation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Relation {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().replace(' ', "_").as_str() {
            "aligns_with" => Ok(Relation::AlignsWith),
            "supports" => Ok(Relation::Supports),
            "undermines" => Ok(Relation::Undermines),
            other => Err(format!("unknown relation `{other}`")),
        }
    }
}

/// Whether a triple came from direct annotation or from label propagation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Seed,
    Propagated,
}

impl Provenance {
    pub fn as_str(self) -> &'static str {
        match self {
            Provenance::Seed => "seed",
            Provenance::Propagated => "propagated",
        }
    }
}

impl fmt::Display for Provenance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Provenance {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "seed" => Ok(Provenance::Seed),
            "propagated" => Ok(Provenance::Propagated),
            other => Err(format!("unknown provenance `{other}`")),
        }
    }
}

/// Optional sentiment carried alongside a triple. The construction pipeline
/// leaves it unset; it survives round-trips through the triple file format.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Polarity {
    Positive,
    Negative,
}

impl Polarity {
    pub fn as_str(self) -> &'static str {
        match self {
            Polarity::Positive => "positive",
            Polarity::Negative => "negative",
        }
    }
}

impl fmt::Display for Polarity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Polarity {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "positive" => Ok(Polarity::Positive),
            "negative" => Ok(Polarity::Negative),
            other => Err(format!("unknown polarity `{other}`")),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum TripleError {
    #[error("confidence {0} outside [0, 1]")]
    BadConfidence(f64),
    #[error("seed triple must carry confidence 1.0, got {0}")]
    SeedConfidence(f64),
    #[error(transparent)]
    Concept(#[from] ConceptError),
}

/// One knowledge base entry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Triple {
    pub concept: Concept,
    pub relation: Relation,
    pub topic: String,
    pub provenance: Provenance,
    pub confidence: f64,
    pub polarity: Option<Polarity>,
}

impl Triple {
    pub fn new(
        concept: Concept,
        relation: Relation,
        topic: impl Into<String>,
        provenance: Provenance,
        confidence: f64,
    ) -> Result<Triple, TripleError> {
        if !(0.0..=1.0).contains(&confidence) || confidence.is_nan() {
            return Err(TripleError::BadConfidence(confidence));
        }
        if provenance == Provenance::Seed && confidence != 1.0 {
            return Err(TripleError::SeedConfidence(confidence));
        }
        Ok(Triple {
            concept,
            relation,
            topic: topic.into(),
            provenance,
            confidence,
            polarity: None,
        })
    }

    /// Directly annotated triple; confidence fixed at 1.0.
    pub fn seed(concept: Concept, relation: Relation, topic: impl Into<String>) -> Triple {
        Triple::new(concept, relation, topic, Provenance::Seed, 1.0)
            .expect("seed triple construction cannot fail")
    }

    /// Identity used for deduplication: the (concept, relation, topic) core,
    /// topic compared case-insensitively.
    pub fn key(&self) -> (String, Relation, String) {
        (
            self.concept.text().to_string(),
            self.relation,
            self.topic.to_lowercase(),
        )
    }
}

impl fmt::Display for Triple {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {}, {})", self.concept, self.relation, self.topic)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum KbError {
    #[error("failed to read triple file: {0}")]
    Io(#[from] std::io::Error),
    #[error("triple file line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

/// The knowledge base: an ordered list of triples plus the taxonomy they
/// refer to. Immutable once built; all queries are read-only.
#[derive(Debug, Clone)]
pub struct KnowledgeBase {
    taxonomy: Taxonomy,
    triples: Vec<Triple>,
}

impl KnowledgeBase {
    pub fn new(taxonomy: Taxonomy) -> KnowledgeBase {
        KnowledgeBase {
            taxonomy,
            triples: Vec::new(),
        }
    }

    /// Builds a KB from triples, dropping exact duplicates (same concept,
    /// relation and topic). Returns the number of duplicates dropped.
    pub fn from_triples(taxonomy: Taxonomy, triples: Vec<Triple>) -> (KnowledgeBase, usize) {
        let mut seen = HashSet::new();
        let mut kept = Vec::with_capacity(triples.len());
        let mut dropped = 0usize;
        for t in triples {
            if seen.insert(t.key()) {
                kept.push(t);
            } else {
                dropped += 1;
            }
        }
        if dropped > 0 {
            log::warn!("dropped {dropped} duplicate triple(s)");
        }
        (
            KnowledgeBase {
                taxonomy,
                triples: kept,
            },
            dropped,
        )
    }

    /// Reads the 6-column tab-separated triple format:
    /// `concept, relation, topic, provenance, confidence, polarity(or "-")`.
    pub fn load(path: &Path, taxonomy: Taxonomy) -> Result<(KnowledgeBase, usize), KbError> {
        let file = std::fs::File::open(path)?;
        let mut triples = Vec::new();
        for (lineno, line) in BufReader::new(file).lines().enumerate() {
            let line = line?;
            let n = lineno + 1;
            let trimmed = line.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            triples.push(parse_triple_line(&line, n)?);
        }
        Ok(KnowledgeBase::from_triples(taxonomy, triples))
    }

    pub fn save(&self, path: &Path) -> Result<(), KbError> {
        let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
        for t in &self.triples {
            writeln!(
                out,
                "{}\t{}\t{}\t{}\t{}\t{}",
                t.concept,
                t.relation,
                t.topic,
                t.provenance,
                t.confidence,
                t.polarity.map_or("-", Polarity::as_str),
            )?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn taxonomy(&self) -> &Taxonomy {
        &self.taxonomy
    }

    pub fn triples(&self) -> &[Triple] {
        &self.triples
    }

    pub fn push(&mut self, triple: Triple) {
        self.triples.push(triple);
    }

    pub fn len(&self) -> usize {
        self.triples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.triples.is_empty()
    }

    /// Unique concepts, in first-appearance order.
    pub fn concepts(&self) -> Vec<&Concept> {
        let mut seen = HashSet::new();
        let mut out = Vec::new();
        for t in &self.triples {
            if seen.insert(t.concept.text()) {
                out.push(&t.concept);
            }
        }
        out
    }

    pub fn unique_concept_count(&self) -> usize {
        self.triples
            .iter()
            .map(|t| t.concept.text())
            .collect::<HashSet<_>>()
            .len()
    }

    pub fn triples_for<'a>(&'a self, concept: &'a Concept) -> impl Iterator<Item = &'a Triple> {
        self.triples
            .iter()
            .filter(move |t| t.concept.text() == concept.text())
    }
}

fn parse_triple_line(line: &str, n: usize) -> Result<Triple, KbError> {
    let cols: Vec<&str> = line.split('\t').map(str::trim).collect();
    if cols.len() != 6 {
        return Err(KbError::Parse {
            line: n,
            msg: format!("expected 6 tab-separated columns, found {}", cols.len()),
        });
    }
    let concept = Concept::new(cols[0]).map_err(|e| KbError::Parse {
        line: n,
        msg: e.to_string(),
    })?;
    let relation: Relation = cols[1]
        .parse()
        .map_err(|msg| KbError::Parse { line: n, msg })?;
    let topic = cols[2].to_string();
    if topic.is_empty() {
        return Err(KbError::Parse {
            line: n,
            msg: "empty topic".into(),
        });
    }
    let provenance: Provenance = cols[3]
        .parse()
        .map_err(|msg| KbError::Parse { line: n, msg })?;
    let confidence: f64 = cols[4].parse().map_err(|e| KbError::Parse {
        line: n,
        msg: format!("bad confidence `{}`: {e}", cols[4]),
    })?;
    let polarity = match cols[5] {
        "-" | "" => None,
        p => Some(p.parse().map_err(|msg| KbError::Parse { line: n, msg })?),
    };
    let mut triple =
        Triple::new(concept, relation, topic, provenance, confidence).map_err(|e| {
            KbError::Parse {
                line: n,
                msg: e.to_string(),
            }
        })?;
    triple.polarity = polarity;
    Ok(triple)
}
