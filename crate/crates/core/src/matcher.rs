//! Finds KB concepts inside report text. Exact mode wants the concept's
//! words contiguous and in order; flexible mode matches the verb and the
//! noun-phrase bigram separately within one sentence.

use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use rayon::prelude::*;
use serde::Deserialize;

use crate::kb::{Concept, KnowledgeBase};

#[derive(Debug, thiserror::Error)]
pub enum MatchError {
    #[error("failed to read corpus: {0}")]
    Io(#[from] std::io::Error),
    #[error("corpus line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

/// One token: the surface form as it appeared and the lowercase lemma
/// used for matching.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    pub surface: String,
    pub lemma: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Sentence {
    pub id: usize,
    pub tokens: Vec<Token>,
}

impl Sentence {
    fn lemmas(&self) -> Vec<&str> {
        self.tokens.iter().map(|t| t.lemma.as_str()).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Document {
    pub doc_id: String,
    pub sentences: Vec<Sentence>,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Corpus {
    pub documents: Vec<Document>,
}

/// Uninflects regular plural/third-person forms. Mirrors the lemma
/// convention concepts are stored under; deliberately conservative, only
/// unambiguous suffixes and a short irregular list are touched.
pub fn lemmatize(word: &str) -> String {
    let w = word.to_lowercase();
    const IRREGULAR: &[(&str, &str)] = &[
        ("men", "man"),
        ("women", "woman"),
        ("children", "child"),
        ("feet", "foot"),
        ("teeth", "tooth"),
        ("mice", "mouse"),
        ("geese", "goose"),
        ("is", "be"),
        ("are", "be"),
        ("was", "be"),
        ("were", "be"),
        ("been", "be"),
        ("has", "have"),
        ("had", "have"),
        ("does", "do"),
        ("did", "do"),
    ];
    if let Some((_, base)) = IRREGULAR.iter().find(|(form, _)| *form == w) {
        return base.to_string();
    }
    if let Some(stem) = w.strip_suffix("ies") {
        if stem.len() >= 2 {
            return format!("{stem}y");
        }
    }
    for suffix in ["sses", "shes", "ches", "xes", "zes"] {
        if let Some(stem) = w.strip_suffix(suffix) {
            return format!("{}{}", stem, &suffix[..suffix.len() - 2]);
        }
    }
    if w.ends_with('s')
        && !w.ends_with("ss")
        && !w.ends_with("us")
        && !w.ends_with("is")
        && w.len() > 3
    {
        return w[..w.len() - 1].to_string();
    }
    w
}

fn clean_token(raw: &str) -> Option<String> {
    let trimmed = raw.trim_matches(|c: char| !c.is_alphanumeric());
    if trimmed.is_empty() {
        return None;
    }
    Some(trimmed.to_string())
}

/// Splits text into sentences on terminal punctuation and tokenizes each:
/// whitespace split, surrounding punctuation stripped, lowercased,
/// lemmatized. Pure punctuation tokens vanish; empty text yields an empty
/// document.
pub fn tokenize_report(doc_id: &str, text: &str) -> Document {
    let mut sentences = Vec::new();
    let mut current = String::new();
    let mut chars = text.chars().peekable();
    let flush = |buf: &mut String, sentences: &mut Vec<Sentence>| {
        let tokens: Vec<Token> = buf
            .split_whitespace()
            .filter_map(clean_token)
            .map(|surface| Token {
                lemma: lemmatize(&surface),
                surface,
            })
            .collect();
        buf.clear();
        if !tokens.is_empty() {
            let id = sentences.len();
            sentences.push(Sentence { id, tokens });
        }
    };
    while let Some(c) = chars.next() {
        current.push(c);
        if matches!(c, '.' | '!' | '?') {
            let boundary = chars.peek().map_or(true, |n| n.is_whitespace());
            if boundary {
                flush(&mut current, &mut sentences);
            }
        }
    }
    flush(&mut current, &mut sentences);
    Document {
        doc_id: doc_id.to_string(),
        sentences,
    }
}

impl Corpus {
    pub fn from_texts<I, S, T>(texts: I) -> Corpus
    where
        I: IntoIterator<Item = (S, T)>,
        S: AsRef<str>,
        T: AsRef<str>,
    {
        Corpus {
            documents: texts
                .into_iter()
                .map(|(id, text)| tokenize_report(id.as_ref(), text.as_ref()))
                .collect(),
        }
    }

    /// JSON Lines corpus: one `{"doc_id": ..., "text": ...}` per line.
    pub fn load_jsonl(path: &Path) -> Result<Corpus, MatchError> {
        #[derive(Deserialize)]
        struct Record {
            doc_id: String,
            text: String,
        }
        let file = std::fs::File::open(path)?;
        let mut documents = Vec::new();
        for (lineno, line) in BufReader::new(file).lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let rec: Record = serde_json::from_str(&line).map_err(|e| MatchError::Parse {
                line: lineno + 1,
                msg: e.to_string(),
            })?;
            documents.push(tokenize_report(&rec.doc_id, &rec.text));
        }
        Ok(Corpus { documents })
    }

    pub fn n_sentences(&self) -> usize {
        self.documents.iter().map(|d| d.sentences.len()).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum MatchMode {
    Exact,
    Flexible,
}

impl MatchMode {
    pub fn as_str(self) -> &'static str {
        match self {
            MatchMode::Exact => "exact",
            MatchMode::Flexible => "flexible",
        }
    }
}

impl std::str::FromStr for MatchMode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_lowercase().as_str() {
            "exact" => Ok(MatchMode::Exact),
            "flexible" => Ok(MatchMode::Flexible),
            other => Err(format!("unknown match mode `{other}`")),
        }
    }
}

/// Token positions of a hit, 0-based inclusive. Flexible hits carry the
/// verb position apart from the noun-phrase span.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum MatchSpan {
    Exact {
        start: usize,
        end: usize,
    },
    Flexible {
        verb: usize,
        np_start: usize,
        np_end: usize,
    },
}

impl std::fmt::Display for MatchSpan {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            MatchSpan::Exact { start, end } => write!(f, "{start}-{end}"),
            MatchSpan::Flexible {
                verb,
                np_start,
                np_end,
            } => write!(f, "{verb};{np_start}-{np_end}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MatchResult {
    pub concept: Concept,
    pub mode: MatchMode,
    pub doc_id: String,
    pub sentence_id: usize,
    pub span: MatchSpan,
}

/// Concept word lists sorted by text; iteration order never depends on KB
/// triple order.
fn sorted_concepts(kb: &KnowledgeBase) -> Vec<(Concept, Vec<String>)> {
    let mut concepts: Vec<Concept> = kb.concepts().into_iter().cloned().collect();
    concepts.sort();
    concepts
        .into_iter()
        .map(|c| {
            let words = c.words().map(|w| w.to_string()).collect();
            (c, words)
        })
        .collect()
}

fn find_contiguous(haystack: &[&str], needle: &[String]) -> Vec<usize> {
    if needle.is_empty() || haystack.len() < needle.len() {
        return Vec::new();
    }
    (0..=haystack.len() - needle.len())
        .filter(|&start| {
            needle
                .iter()
                .zip(&haystack[start..start + needle.len()])
                .all(|(n, h)| n == h)
        })
        .collect()
}

/// Every contiguous occurrence of every KB concept, all occurrences
/// reported. Results are ordered by document, sentence, concept text,
/// start position.
pub fn match_exact(kb: &KnowledgeBase, corpus: &Corpus) -> Vec<MatchResult> {
    let concepts = sorted_concepts(kb);
    corpus
        .documents
        .par_iter()
        .flat_map(|doc| {
            let concepts = &concepts;
            doc.sentences.par_iter().flat_map(move |sentence| {
                let lemmas = sentence.lemmas();
                let mut hits = Vec::new();
                for (concept, words) in concepts {
                    for start in find_contiguous(&lemmas, words) {
                        hits.push(MatchResult {
                            concept: concept.clone(),
                            mode: MatchMode::Exact,
                            doc_id: doc.doc_id.clone(),
                            sentence_id: sentence.id,
                            span: MatchSpan::Exact {
                                start,
                                end: start + words.len() - 1,
                            },
                        });
                    }
                }
                hits
            })
        })
        .collect()
}

/// Flexible hits: for a 3-word concept the verb must appear somewhere and
/// the noun-phrase bigram contiguously after it, all within one sentence;
/// 2-word concepts fall back to contiguous matching. At most one result
/// per (concept, sentence), carrying the earliest pairing.
pub fn match_flexible(kb: &KnowledgeBase, corpus: &Corpus) -> Vec<MatchResult> {
    let concepts = sorted_concepts(kb);
    corpus
        .documents
        .par_iter()
        .flat_map(|doc| {
            let concepts = &concepts;
            doc.sentences.par_iter().flat_map(move |sentence| {
                let lemmas = sentence.lemmas();
                let mut hits = Vec::new();
                for (concept, words) in concepts {
                    let span = match words.len() {
                        2 => find_contiguous(&lemmas, words).first().map(|&start| {
                            MatchSpan::Flexible {
                                verb: start,
                                np_start: start + 1,
                                np_end: start + 1,
                            }
                        }),
                        3 => flexible_span(&lemmas, words),
                        _ => None,
                    };
                    if let Some(span) = span {
                        hits.push(MatchResult {
                            concept: concept.clone(),
                            mode: MatchMode::Flexible,
                            doc_id: doc.doc_id.clone(),
                            sentence_id: sentence.id,
                            span,
                        });
                    }
                }
                hits
            })
        })
        .collect()
}

fn flexible_span(lemmas: &[&str], words: &[String]) -> Option<MatchSpan> {
    let bigram = &words[1..3];
    for verb in 0..lemmas.len() {
        if lemmas[verb] != words[0] {
            continue;
        }
        for np_start in (verb + 1)..lemmas.len().saturating_sub(1) {
            if lemmas[np_start] == bigram[0] && lemmas[np_start + 1] == bigram[1] {
                return Some(MatchSpan::Flexible {
                    verb,
                    np_start,
                    np_end: np_start + 1,
                });
            }
        }
    }
    None
}

pub fn run_matcher(kb: &KnowledgeBase, corpus: &Corpus, mode: MatchMode) -> Vec<MatchResult> {
    match mode {
        MatchMode::Exact => match_exact(kb, corpus),
        MatchMode::Flexible => match_flexible(kb, corpus),
    }
}

/// Writes `doc_id \t sentence_id \t concept \t mode \t span` rows.
pub fn write_matches(path: &Path, matches: &[MatchResult]) -> Result<(), MatchError> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    for m in matches {
        writeln!(
            out,
            "{}\t{}\t{}\t{}\t{}",
            m.doc_id,
            m.sentence_id,
            m.concept,
            m.mode.as_str(),
            m.span
        )?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_matches(path: &Path) -> Result<Vec<MatchResult>, MatchError> {
    let parse_span = |mode: MatchMode, s: &str| -> Option<MatchSpan> {
        match mode {
            MatchMode::Exact => {
                let (a, b) = s.split_once('-')?;
                Some(MatchSpan::Exact {
                    start: a.parse().ok()?,
                    end: b.parse().ok()?,
                })
            }
            MatchMode::Flexible => {
                let (v, np) = s.split_once(';')?;
                let (a, b) = np.split_once('-')?;
                Some(MatchSpan::Flexible {
                    verb: v.parse().ok()?,
                    np_start: a.parse().ok()?,
                    np_end: b.parse().ok()?,
                })
            }
        }
    };
    let file = std::fs::File::open(path)?;
    let mut out = Vec::new();
    for (lineno, line) in BufReader::new(file).lines().enumerate() {
        let line = line?;
        let ln = lineno + 1;
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let cols: Vec<&str> = line.split('\t').collect();
        if cols.len() != 5 {
            return Err(MatchError::Parse {
                line: ln,
                msg: format!("expected 5 tab-separated columns, found {}", cols.len()),
            });
        }
        let mode: MatchMode = cols[3]
            .parse()
            .map_err(|e: String| MatchError::Parse { line: ln, msg: e })?;
        let result = MatchResult {
            doc_id: cols[0].to_string(),
            sentence_id: cols[1].parse().map_err(|_| MatchError::Parse {
                line: ln,
                msg: format!("bad sentence id `{}`", cols[1]),
            })?,
            concept: Concept::new(cols[2]).map_err(|e| MatchError::Parse {
                line: ln,
                msg: e.to_string(),
            })?,
            mode,
            span: parse_span(mode, cols[4]).ok_or_else(|| MatchError::Parse {
                line: ln,
                msg: format!("bad span `{}`", cols[4]),
            })?,
        };
        out.push(result);
    }
    Ok(out)
}
