//! Lexicon quality metrics: what fraction of a term list is ESG-related
//! and action-oriented, per an external judge, plus inter-judge agreement.

use std::collections::{BTreeMap, BTreeSet};
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use crate::annotate::{Annotator, Gateway};

#[derive(Debug, thiserror::Error)]
pub enum MetricsError {
    #[error("failed to read judgments: {0}")]
    Io(#[from] std::io::Error),
    #[error("judgments line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("no terms to evaluate")]
    NoTerms,
    #[error("{count} terms lack judgments: {listed}")]
    Unjudged { count: usize, listed: String },
    #[error("conflicting judgments for `{0}` from the same judge")]
    Conflict(String),
    #[error("judges covered different term sets: {0} terms only on one side")]
    TermSetMismatch(usize),
}

/// One judge's verdict on one term.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Judgment {
    pub term: String,
    pub esg_related: bool,
    pub action_oriented: bool,
    pub judge: String,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Metrics {
    /// Number of distinct ESG-related terms.
    pub esg_unique: usize,
    /// Fraction of terms judged ESG-related.
    pub esg_rel: f64,
    /// Fraction of terms judged action-oriented.
    pub esg_act: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Agreement {
    pub esg_related: f64,
    pub action_oriented: f64,
}

/// Normalizes a term the way concepts are stored: lowercase, single
/// spaces.
pub fn normalize_term(term: &str) -> String {
    term.split_whitespace()
        .collect::<Vec<_>>()
        .join(" ")
        .to_lowercase()
}

/// Deduplicated, normalized term set from any term source.
pub fn collect_topic_terms<I, S>(terms: I) -> BTreeSet<String>
where
    I: IntoIterator<Item = S>,
    S: AsRef<str>,
{
    terms
        .into_iter()
        .map(|t| normalize_term(t.as_ref()))
        .filter(|t| !t.is_empty())
        .collect()
}

fn judgment_map(judgments: &[Judgment]) -> Result<BTreeMap<String, (bool, bool)>, MetricsError> {
    let mut map = BTreeMap::new();
    for j in judgments {
        let term = normalize_term(&j.term);
        let labels = (j.esg_related, j.action_oriented);
        if let Some(prev) = map.insert(term, labels) {
            if prev != labels {
                return Err(MetricsError::Conflict(normalize_term(&j.term)));
            }
        }
    }
    Ok(map)
}

fn list_missing(missing: &[&str]) -> String {
    const SHOW: usize = 10;
    let mut listed = missing
        .iter()
        .take(SHOW)
        .map(|t| format!("`{t}`"))
        .collect::<Vec<_>>()
        .join(", ");
    if missing.len() > SHOW {
        listed.push_str(&format!(", … ({} more)", missing.len() - SHOW));
    }
    listed
}

/// Fraction of terms judged ESG-related / action-oriented. Every term
/// needs a judgment; missing ones are an error and get listed.
pub fn aggregate_metrics(
    terms: &BTreeSet<String>,
    judgments: &[Judgment],
) -> Result<Metrics, MetricsError> {
    if terms.is_empty() {
        return Err(MetricsError::NoTerms);
    }
    let map = judgment_map(judgments)?;
    let missing: Vec<&str> = terms
        .iter()
        .filter(|t| !map.contains_key(*t))
        .map(|t| t.as_str())
        .collect();
    if !missing.is_empty() {
        return Err(MetricsError::Unjudged {
            count: missing.len(),
            listed: list_missing(&missing),
        });
    }
    let esg_unique = terms.iter().filter(|t| map[*t].0).count();
    let action = terms.iter().filter(|t| map[*t].1).count();
    let n = terms.len() as f64;
    Ok(Metrics {
        esg_unique,
        esg_rel: esg_unique as f64 / n,
        esg_act: action as f64 / n,
    })
}

/// Per-task fraction of terms both judges labelled identically. The two
/// judgment lists must cover the same term set.
pub fn agreement(a: &[Judgment], b: &[Judgment]) -> Result<Agreement, MetricsError> {
    let map_a = judgment_map(a)?;
    let map_b = judgment_map(b)?;
    let only_one_side = map_a
        .keys()
        .filter(|t| !map_b.contains_key(*t))
        .chain(map_b.keys().filter(|t| !map_a.contains_key(*t)))
        .count();
    if only_one_side > 0 {
        return Err(MetricsError::TermSetMismatch(only_one_side));
    }
    if map_a.is_empty() {
        return Err(MetricsError::NoTerms);
    }
    let n = map_a.len() as f64;
    let mut related = 0usize;
    let mut action = 0usize;
    for (term, &(rel_a, act_a)) in &map_a {
        let (rel_b, act_b) = map_b[term];
        related += usize::from(rel_a == rel_b);
        action += usize::from(act_a == act_b);
    }
    Ok(Agreement {
        esg_related: related as f64 / n,
        action_oriented: action as f64 / n,
    })
}

/// Judges every term with the relatedness and action prompts. Terms the
/// backend leaves undecided are returned separately; they stay unjudged.
pub fn judge_terms<A: Annotator>(
    gateway: &Gateway<A>,
    terms: &BTreeSet<String>,
    judge: &str,
) -> (Vec<Judgment>, Vec<String>) {
    let inputs: Vec<String> = terms.iter().cloned().collect();
    let related = gateway.esg_related(&inputs);
    let action = gateway.action_oriented(&inputs);
    let mut judgments = Vec::new();
    let mut undecided = Vec::new();
    for ((term, rel), act) in inputs.into_iter().zip(related).zip(action) {
        match (rel, act) {
            (Some(esg_related), Some(action_oriented)) => judgments.push(Judgment {
                term,
                esg_related,
                action_oriented,
                judge: judge.to_string(),
            }),
            _ => undecided.push(term),
        }
    }
    (judgments, undecided)
}

/// Writes `term \t esg_related \t action_oriented \t judge` rows.
pub fn write_judgments(path: &Path, judgments: &[Judgment]) -> Result<(), MetricsError> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    for j in judgments {
        writeln!(
            out,
            "{}\t{}\t{}\t{}",
            j.term, j.esg_related, j.action_oriented, j.judge
        )?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_judgments(path: &Path) -> Result<Vec<Judgment>, MetricsError> {
    let file = std::fs::File::open(path)?;
    let mut out = Vec::new();
    for (lineno, line) in BufReader::new(file).lines().enumerate() {
        let line = line?;
        let ln = lineno + 1;
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let cols: Vec<&str> = line.split('\t').collect();
        if cols.len() != 4 {
            return Err(MetricsError::Parse {
                line: ln,
                msg: format!("expected 4 tab-separated columns, found {}", cols.len()),
            });
        }
        let parse_bool = |s: &str| -> Result<bool, MetricsError> {
            s.trim().parse().map_err(|_| MetricsError::Parse {
                line: ln,
                msg: format!("expected true/false, found `{s}`"),
            })
        };
        out.push(Judgment {
            term: cols[0].to_string(),
            esg_related: parse_bool(cols[1])?,
            action_oriented: parse_bool(cols[2])?,
            judge: cols[3].to_string(),
        });
    }
    Ok(out)
}
