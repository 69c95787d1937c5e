//! Concept extraction from dependency parses.
//!
//! Two passes over each sentence: verb-noun pairs connected by a subject,
//! object or oblique dependency, then expansion of each pair with noun or
//! adjective modifiers of the pair's noun. Emitted concepts are lemma-form
//! and lowercase; each sentence yields a set.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::kb::Concept;

use super::conllu::ParsedSentence;

/// Syntactic shape of an extracted concept.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Pattern {
    VerbNoun,
    VerbNounNoun,
    VerbAdjNoun,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CandidateConcept {
    pub concept: Concept,
    pub pattern: Pattern,
    pub doc_id: String,
    pub sent_id: String,
}

/// POS tags accepted for each word class. An entry ending in `*` matches by
/// prefix (`VB*` covers VB, VBD, VBG...), anything else matches exactly.
/// Defaults accept both UPOS and Penn-style tags.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PosClasses {
    pub verb: Vec<String>,
    pub noun: Vec<String>,
    pub adjective: Vec<String>,
}

impl Default for PosClasses {
    fn default() -> Self {
        PosClasses {
            verb: vec!["VERB".into(), "VB*".into()],
            noun: vec!["NOUN".into(), "PROPN".into(), "NN*".into()],
            adjective: vec!["ADJ".into(), "JJ*".into()],
        }
    }
}

fn tag_matches(patterns: &[String], tag: &str) -> bool {
    patterns.iter().any(|p| match p.strip_suffix('*') {
        Some(prefix) => tag.starts_with(prefix),
        None => tag == p,
    })
}

impl PosClasses {
    pub fn is_verb(&self, tag: &str) -> bool {
        tag_matches(&self.verb, tag)
    }
    pub fn is_noun(&self, tag: &str) -> bool {
        tag_matches(&self.noun, tag)
    }
    pub fn is_adjective(&self, tag: &str) -> bool {
        tag_matches(&self.adjective, tag)
    }
}

/// Dependency labels that trigger extraction. Labels are compared after
/// stripping any `:` subtype, so `obl:agent` counts as `obl`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DepSets {
    /// Relations linking a verb to a noun (pair extraction).
    pub verb_noun: Vec<String>,
    /// Relations linking a modifier to the pair's noun (expansion).
    pub modifier: Vec<String>,
}

impl Default for DepSets {
    fn default() -> Self {
        DepSets {
            verb_noun: vec!["nsubj".into(), "obj".into(), "obl".into()],
            modifier: vec![
                "compound".into(),
                "amod".into(),
                "nn".into(),
                "appos".into(),
                "flat".into(),
                "nmod".into(),
            ],
        }
    }
}

pub fn base_deprel(deprel: &str) -> &str {
    deprel.split(':').next().unwrap_or(deprel)
}

impl DepSets {
    pub fn is_verb_noun(&self, deprel: &str) -> bool {
        let base = base_deprel(deprel);
        self.verb_noun.iter().any(|d| d == base)
    }
    pub fn is_modifier(&self, deprel: &str) -> bool {
        let base = base_deprel(deprel);
        self.modifier.iter().any(|d| d == base)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct ParserConfig {
    pub pos: PosClasses,
    pub deps: DepSets,
}

/// Extracts every candidate concept from one sentence.
///
/// Pass 1: each dependency in the verb-noun set linking a verb and a noun
/// (either token may be the head) yields the pair verb+noun. Pass 2: for each
/// pair, every modifier dependency headed by the pair's noun whose dependent
/// is a noun or adjective yields verb+dependent+noun. Duplicates collapse;
/// results are ordered by concept text. Tokens with empty POS or dependency
/// labels are skipped with a warning.
pub fn parse_concepts(sentence: &ParsedSentence, config: &ParserConfig) -> Vec<CandidateConcept> {
    let mut out: BTreeMap<String, CandidateConcept> = BTreeMap::new();
    let mut emit = |words: &[&str], pattern: Pattern| {
        let concept = match Concept::from_tokens(words) {
            Ok(c) => c,
            Err(e) => {
                log::warn!(
                    "sentence `{}`: skipped malformed concept {:?}: {e}",
                    sentence.sent_id,
                    words
                );
                return;
            }
        };
        out.entry(concept.text().to_string())
            .or_insert(CandidateConcept {
                concept,
                pattern,
                doc_id: sentence.doc_id.clone(),
                sent_id: sentence.sent_id.clone(),
            });
    };

    // (verb index, noun index), 1-based
    let mut pairs: Vec<(usize, usize)> = Vec::new();
    for (i, tok) in sentence.tokens.iter().enumerate() {
        let dep_idx = i + 1;
        if tok.deprel.is_empty() || tok.deprel == "_" {
            log::warn!(
                "sentence `{}`: token {dep_idx} has no dependency label, skipped",
                sentence.sent_id
            );
            continue;
        }
        if !config.deps.is_verb_noun(&tok.deprel) {
            continue;
        }
        let Some(head) = sentence.token(tok.head) else {
            continue; // head 0 (root) cannot form a pair
        };
        let head_idx = tok.head;
        // the verb is emitted first whichever side of the dependency it is on
        if config.pos.is_verb(&head.upos) && config.pos.is_noun(&tok.upos) {
            pairs.push((head_idx, dep_idx));
        } else if config.pos.is_noun(&head.upos) && config.pos.is_verb(&tok.upos) {
            pairs.push((dep_idx, head_idx));
        }
    }

    for &(v_idx, n_idx) in &pairs {
        let verb = sentence.token(v_idx).unwrap();
        let noun = sentence.token(n_idx).unwrap();
        let v = verb.lemma_lower();
        let n = noun.lemma_lower();
        emit(&[&v, &n], Pattern::VerbNoun);

        for (j, m) in sentence.tokens.iter().enumerate() {
            let m_idx = j + 1;
            if m_idx == v_idx || m_idx == n_idx || m.head != n_idx {
                continue;
            }
            if !config.deps.is_modifier(&m.deprel) {
                continue;
            }
            let w = m.lemma_lower();
            if config.pos.is_noun(&m.upos) {
                emit(&[&v, &w, &n], Pattern::VerbNounNoun);
            } else if config.pos.is_adjective(&m.upos) {
                emit(&[&v, &w, &n], Pattern::VerbAdjNoun);
            }
        }
    }

    out.into_values().collect()
}

/// Runs [`parse_concepts`] over many sentences, concatenating per-sentence
/// sets in input order.
pub fn parse_all(sentences: &[ParsedSentence], config: &ParserConfig) -> Vec<CandidateConcept> {
    sentences
        .iter()
        .flat_map(|s| parse_concepts(s, config))
        .collect()
}
