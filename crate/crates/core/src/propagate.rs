//! Spreads seed relation labels across the similarity graph with the
//! normalized damped update L ← α·S·L + (1−α)·L⁰, S = D^(−1/2)·A·D^(−1/2),
//! and turns the scores into propagated triples.

use std::collections::BTreeMap;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use rayon::prelude::*;

use crate::graph::SemanticGraph;
use crate::kb::{Concept, Pillar, Provenance, Relation, Taxonomy, TopicType, Triple};

pub const DEFAULT_N_LAYERS: usize = 50;
pub const DEFAULT_ALPHA: f64 = 0.5;
pub const CONVERGENCE_TOL: f64 = 1e-9;
pub const DEFAULT_TAU_ASSIGN: f64 = 0.0;

#[derive(Debug, thiserror::Error)]
pub enum PropagateError {
    #[error("failed to read label file: {0}")]
    Io(#[from] std::io::Error),
    #[error("label file line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("node {0} outside matrix with {1} rows")]
    NodeOutOfRange(usize, usize),
    #[error("node {node} carries two seed labels in one task: {a} and {b}")]
    ConflictingSeed { node: usize, a: String, b: String },
    #[error("no seed rows; nothing to propagate")]
    NoSeeds,
    #[error("graph has {graph} nodes but the matrix has {matrix} rows")]
    SizeMismatch { graph: usize, matrix: usize },
    #[error("matrix entries must be finite and non-negative")]
    BadEntry,
}

/// One label class: a (relation, topic) pair.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct LabelClass {
    pub relation: Relation,
    pub topic: String,
}

impl std::fmt::Display for LabelClass {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "({}, {})", self.relation, self.topic)
    }
}

/// Node-by-class score matrix for one propagation task. Seed rows hold the
/// fixed input distribution (one-hot when built from seed labels).
#[derive(Debug, Clone, PartialEq)]
pub struct LabelMatrix {
    n_nodes: usize,
    classes: Vec<LabelClass>,
    data: Vec<f64>,
    seed_mask: Vec<bool>,
}

impl LabelMatrix {
    /// Builds a one-hot matrix from (node, relation, topic) seed labels.
    /// Classes are the distinct pairs, sorted. Duplicate identical labels
    /// collapse; two different labels on one node are rejected.
    pub fn from_seeds(
        n_nodes: usize,
        seeds: &[(usize, Relation, String)],
    ) -> Result<LabelMatrix, PropagateError> {
        let mut classes: Vec<LabelClass> = seeds
            .iter()
            .map(|(_, r, t)| LabelClass {
                relation: *r,
                topic: t.clone(),
            })
            .collect();
        classes.sort();
        classes.dedup();

        let k = classes.len();
        let mut data = vec![0.0; n_nodes * k];
        let mut seed_mask = vec![false; n_nodes];
        let mut seen: BTreeMap<usize, LabelClass> = BTreeMap::new();
        for (node, relation, topic) in seeds {
            if *node >= n_nodes {
                return Err(PropagateError::NodeOutOfRange(*node, n_nodes));
            }
            let class = LabelClass {
                relation: *relation,
                topic: topic.clone(),
            };
            if let Some(prev) = seen.get(node) {
                if *prev != class {
                    return Err(PropagateError::ConflictingSeed {
                        node: *node,
                        a: prev.to_string(),
                        b: class.to_string(),
                    });
                }
                continue;
            }
            let col = classes
                .binary_search(&class)
                .expect("class collected above");
            data[node * k + col] = 1.0;
            seed_mask[*node] = true;
            seen.insert(*node, class);
        }
        Ok(LabelMatrix {
            n_nodes,
            classes,
            data,
            seed_mask,
        })
    }

    /// Builds a matrix from explicit rows; seed rows need not be one-hot.
    pub fn from_parts(
        classes: Vec<LabelClass>,
        rows: Vec<Vec<f64>>,
        seed_mask: Vec<bool>,
    ) -> Result<LabelMatrix, PropagateError> {
        let n_nodes = rows.len();
        assert_eq!(seed_mask.len(), n_nodes);
        let k = classes.len();
        let mut data = Vec::with_capacity(n_nodes * k);
        for row in rows {
            assert_eq!(row.len(), k, "row width must match class count");
            if row.iter().any(|x| !x.is_finite() || *x < 0.0) {
                return Err(PropagateError::BadEntry);
            }
            data.extend(row);
        }
        Ok(LabelMatrix {
            n_nodes,
            classes,
            data,
            seed_mask,
        })
    }

    pub fn n_nodes(&self) -> usize {
        self.n_nodes
    }

    pub fn n_classes(&self) -> usize {
        self.classes.len()
    }

    pub fn classes(&self) -> &[LabelClass] {
        &self.classes
    }

    pub fn row(&self, node: usize) -> &[f64] {
        let k = self.classes.len();
        &self.data[node * k..(node + 1) * k]
    }

    pub fn is_seed(&self, node: usize) -> bool {
        self.seed_mask[node]
    }

    pub fn seed_count(&self) -> usize {
        self.seed_mask.iter().filter(|&&s| s).count()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PropagationResult {
    pub matrix: LabelMatrix,
    pub iterations: usize,
    pub converged: bool,
}

/// Runs the damped normalized propagation for up to `n_layers` passes,
/// stopping early once the largest entry change falls below 1e-9. Seed rows
/// are reset to their input values after every pass. Zero-degree rows have
/// an all-zero S row, so isolated non-seeds keep a zero score row.
pub fn propagate(
    graph: &SemanticGraph,
    seeds: &LabelMatrix,
    n_layers: usize,
    alpha: f64,
) -> Result<PropagationResult, PropagateError> {
    let n = seeds.n_nodes();
    if graph.n_nodes() != n {
        return Err(PropagateError::SizeMismatch {
            graph: graph.n_nodes(),
            matrix: n,
        });
    }
    if seeds.seed_count() == 0 {
        return Err(PropagateError::NoSeeds);
    }
    let k = seeds.n_classes();

    // S row per node: neighbors with weight w_ij / sqrt(d_i * d_j), in the
    // adjacency's fixed index order so summation order never varies
    let degree: Vec<f64> = (0..n).map(|i| graph.weighted_degree(i)).collect();
    let s_rows: Vec<Vec<(usize, f64)>> = (0..n)
        .map(|i| {
            if degree[i] == 0.0 {
                return Vec::new();
            }
            graph
                .neighbors(i)
                .iter()
                .map(|&(j, w)| (j, w / (degree[i] * degree[j]).sqrt()))
                .collect()
        })
        .collect();

    let initial = seeds.data.clone();
    let mut current = initial.clone();
    let mut iterations = 0;
    let mut converged = false;

    while iterations < n_layers {
        iterations += 1;
        let (next, max_change): (Vec<f64>, f64) = {
            let rows: Vec<(Vec<f64>, f64)> = (0..n)
                .into_par_iter()
                .map(|i| {
                    let base = i * k;
                    if seeds.seed_mask[i] {
                        let row = initial[base..base + k].to_vec();
                        let change = row
                            .iter()
                            .zip(&current[base..base + k])
                            .map(|(a, b)| (a - b).abs())
                            .fold(0.0f64, f64::max);
                        return (row, change);
                    }
                    let mut row = vec![0.0f64; k];
                    for &(j, s) in &s_rows[i] {
                        let jb = j * k;
                        for (c, cell) in row.iter_mut().enumerate() {
                            *cell += s * current[jb + c];
                        }
                    }
                    let mut change = 0.0f64;
                    for (c, cell) in row.iter_mut().enumerate() {
                        *cell = alpha * *cell + (1.0 - alpha) * initial[base + c];
                        change = change.max((*cell - current[base + c]).abs());
                    }
                    (row, change)
                })
                .collect();
            let mut flat = Vec::with_capacity(n * k);
            let mut max_change = 0.0f64;
            for (row, change) in rows {
                flat.extend(row);
                max_change = max_change.max(change);
            }
            (flat, max_change)
        };
        current = next;
        if max_change < CONVERGENCE_TOL {
            converged = true;
            break;
        }
    }

    Ok(PropagationResult {
        matrix: LabelMatrix {
            n_nodes: n,
            classes: seeds.classes.clone(),
            data: current,
            seed_mask: seeds.seed_mask.clone(),
        },
        iterations,
        converged,
    })
}

/// Converts propagated scores into triples. Each non-seed row whose largest
/// entry strictly exceeds `tau_assign` yields one triple for the argmax
/// class with confidence = max / row sum; a tied argmax yields nothing and
/// is logged.
pub fn assign_labels(matrix: &LabelMatrix, concepts: &[Concept], tau_assign: f64) -> Vec<Triple> {
    assert_eq!(concepts.len(), matrix.n_nodes());
    let mut out = Vec::new();
    for node in 0..matrix.n_nodes() {
        if matrix.is_seed(node) {
            continue;
        }
        let row = matrix.row(node);
        if row.is_empty() {
            continue;
        }
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if !(max > tau_assign) {
            continue;
        }
        if row.iter().filter(|&&x| x == max).count() > 1 {
            log::warn!("node {node} ({}): tied argmax, no label", concepts[node]);
            continue;
        }
        let col = row.iter().position(|&x| x == max).expect("max exists");
        let sum: f64 = row.iter().sum();
        let class = &matrix.classes()[col];
        let confidence = max / sum;
        match Triple::new(
            concepts[node].clone(),
            class.relation,
            class.topic.clone(),
            Provenance::Propagated,
            confidence,
        ) {
            Ok(t) => out.push(t),
            Err(e) => log::warn!("node {node}: dropped propagated label: {e}"),
        }
    }
    out
}

/// Reads seed labels as tab-separated `concept \t relation \t topic` rows.
pub fn read_seed_labels(path: &Path) -> Result<Vec<(Concept, Relation, String)>, PropagateError> {
    let file = std::fs::File::open(path)?;
    let mut rows = Vec::new();
    for (lineno, line) in BufReader::new(file).lines().enumerate() {
        let line = line?;
        let ln = lineno + 1;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let cols: Vec<&str> = trimmed.split('\t').collect();
        if cols.len() != 3 {
            return Err(PropagateError::Parse {
                line: ln,
                msg: format!("expected 3 tab-separated columns, found {}", cols.len()),
            });
        }
        let concept = Concept::new(cols[0]).map_err(|e| PropagateError::Parse {
            line: ln,
            msg: e.to_string(),
        })?;
        let relation: Relation = cols[1].parse().map_err(|e| PropagateError::Parse {
            line: ln,
            msg: format!("{e}"),
        })?;
        rows.push((concept, relation, cols[2].to_string()));
    }
    Ok(rows)
}

pub fn write_seed_labels(
    path: &Path,
    rows: &[(Concept, Relation, String)],
) -> Result<(), PropagateError> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    for (concept, relation, topic) in rows {
        writeln!(out, "{concept}\t{relation}\t{topic}")?;
    }
    out.flush()?;
    Ok(())
}

/// Splits seed labels into one propagation task per topic type. Labels
/// whose topic is absent from the taxonomy are skipped with a warning;
/// the count of skipped labels is returned alongside.
pub fn split_by_topic_type(
    taxonomy: &Taxonomy,
    labels: &[(Concept, Relation, String)],
) -> (BTreeMap<TopicType, Vec<(Concept, Relation, String)>>, usize) {
    let mut tasks: BTreeMap<TopicType, Vec<(Concept, Relation, String)>> = BTreeMap::new();
    let mut skipped = 0;
    for (concept, relation, topic) in labels {
        match taxonomy.get(topic) {
            Some(t) => tasks.entry(t.topic_type).or_default().push((
                concept.clone(),
                *relation,
                t.name.clone(),
            )),
            None => {
                log::warn!("seed label for `{concept}` names unknown topic `{topic}`, skipped");
                skipped += 1;
            }
        }
    }
    (tasks, skipped)
}

/// Drops propagated triples that contradict a concept's unambiguous
/// context: a second label of an already-labelled topic type, a child
/// whose declared parent differs from the concept's single parent-level
/// topic, or a cross-level label on a concept whose single pillar is not
/// Environmental. Labels with no context present are kept. Seed triples
/// pass through untouched. Returns the kept triples and the dropped count.
pub fn condition_propagated(taxonomy: &Taxonomy, triples: Vec<Triple>) -> (Vec<Triple>, usize) {
    let mut by_concept: BTreeMap<String, Vec<usize>> = BTreeMap::new();
    for (i, t) in triples.iter().enumerate() {
        by_concept
            .entry(t.concept.text().to_string())
            .or_default()
            .push(i);
    }

    let type_of = |t: &Triple| taxonomy.get(&t.topic).map(|topic| topic.topic_type);
    let mut keep = vec![true; triples.len()];

    for indices in by_concept.values() {
        // single unambiguous topic per type, considering all triples
        let mut per_type: BTreeMap<TopicType, Vec<usize>> = BTreeMap::new();
        for &i in indices {
            if let Some(tt) = type_of(&triples[i]) {
                per_type.entry(tt).or_default().push(i);
            }
        }
        let sole = |tt: TopicType| -> Option<&str> {
            match per_type.get(&tt).map(Vec::as_slice) {
                Some([only]) => Some(taxonomy.canonical_name(&triples[*only].topic).unwrap()),
                _ => None,
            }
        };
        let pillar: Option<Pillar> = sole(TopicType::Pillar).and_then(|name| name.parse().ok());

        for (&tt, members) in &per_type {
            // a type may carry one label; propagated extras are dropped
            if members.len() > 1 {
                let mut taken = members
                    .iter()
                    .any(|&i| triples[i].provenance == Provenance::Seed);
                for &i in members {
                    if triples[i].provenance != Provenance::Propagated {
                        continue;
                    }
                    if taken {
                        keep[i] = false;
                        log::info!(
                            "dropped propagated {} for `{}`: type already labelled",
                            triples[i],
                            triples[i].concept
                        );
                    } else {
                        taken = true;
                    }
                }
            }

            let parent_type = match tt {
                TopicType::Sub => Some(TopicType::Broad),
                TopicType::CrossSub => Some(TopicType::CrossBroad),
                _ => None,
            };
            for &i in members {
                if triples[i].provenance != Provenance::Propagated || !keep[i] {
                    continue;
                }
                let topic = taxonomy.get(&triples[i].topic).expect("typed above");
                if let Some(pt) = parent_type {
                    if let (Some(parent_label), Some(declared)) =
                        (sole(pt), topic.parent.as_deref())
                    {
                        if !parent_label.eq_ignore_ascii_case(declared) {
                            keep[i] = false;
                            log::info!(
                                "dropped propagated {} for `{}`: parent is {}",
                                triples[i],
                                triples[i].concept,
                                parent_label
                            );
                            continue;
                        }
                    }
                }
                if matches!(tt, TopicType::CrossBroad | TopicType::CrossSub) {
                    if let Some(p) = pillar {
                        if p != Pillar::Environmental {
                            keep[i] = false;
                            log::info!(
                                "dropped propagated {} for `{}`: pillar is {}",
                                triples[i],
                                triples[i].concept,
                                p
                            );
                        }
                    }
                }
            }
        }
    }

    let dropped = keep.iter().filter(|&&k| !k).count();
    let kept = triples
        .into_iter()
        .zip(keep)
        .filter_map(|(t, k)| k.then_some(t))
        .collect();
    (kept, dropped)
}
