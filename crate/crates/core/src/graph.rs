//! Concept similarity graph. Nodes are concept embeddings; an edge connects
//! two concepts whose cosine similarity strictly exceeds the threshold
//! (0.80 by default) and carries that similarity as its weight.

use std::collections::HashMap;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use rayon::prelude::*;
use serde::Deserialize;

use crate::kb::Concept;

pub const DEFAULT_SIMILARITY_THRESHOLD: f64 = 0.80;

#[derive(Debug, thiserror::Error)]
pub enum GraphError {
    #[error("failed to read embeddings: {0}")]
    Io(#[from] std::io::Error),
    #[error("embeddings line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("embeddings line {line}: dimension {got} differs from {expected}")]
    DimensionMismatch {
        line: usize,
        got: usize,
        expected: usize,
    },
    #[error("embeddings line {line}: zero vector for `{concept}`")]
    ZeroVector { line: usize, concept: String },
    #[error("embeddings line {line}: duplicate concept `{concept}`")]
    DuplicateConcept { line: usize, concept: String },
    #[error("cosine requires equal dimensions, got {0} and {1}")]
    CosineDimensions(usize, usize),
    #[error("cosine undefined for a zero vector")]
    CosineZeroVector,
}

/// Embeddings for an ordered list of concepts; row i belongs to concept i.
#[derive(Debug, Clone)]
pub struct EmbeddingTable {
    concepts: Vec<Concept>,
    vectors: Vec<f64>,
    dim: usize,
}

#[derive(Deserialize)]
struct EmbeddingRecord {
    concept: String,
    vector: Vec<f64>,
}

impl EmbeddingTable {
    pub fn new(concepts: Vec<Concept>, rows: Vec<Vec<f64>>) -> Result<EmbeddingTable, GraphError> {
        assert_eq!(concepts.len(), rows.len(), "one vector per concept");
        let mut table = EmbeddingTable {
            concepts: Vec::new(),
            vectors: Vec::new(),
            dim: 0,
        };
        let mut seen = HashMap::new();
        for (i, (concept, row)) in concepts.into_iter().zip(rows).enumerate() {
            table.push_checked(concept, row, i + 1, &mut seen)?;
        }
        Ok(table)
    }

    /// Reads JSON Lines records `{"concept": ..., "vector": [...]}` in file
    /// order. Rejects inconsistent dimensions, zero vectors, non-finite
    /// components and duplicate concepts.
    pub fn load(path: &Path) -> Result<EmbeddingTable, GraphError> {
        let file = std::fs::File::open(path)?;
        let mut table = EmbeddingTable {
            concepts: Vec::new(),
            vectors: Vec::new(),
            dim: 0,
        };
        let mut seen = HashMap::new();
        for (lineno, line) in BufReader::new(file).lines().enumerate() {
            let line = line?;
            let n = lineno + 1;
            let trimmed = line.trim();
            if trimmed.is_empty() {
                continue;
            }
            let record: EmbeddingRecord =
                serde_json::from_str(trimmed).map_err(|e| GraphError::Parse {
                    line: n,
                    msg: e.to_string(),
                })?;
            let concept = Concept::new(&record.concept).map_err(|e| GraphError::Parse {
                line: n,
                msg: e.to_string(),
            })?;
            table.push_checked(concept, record.vector, n, &mut seen)?;
        }
        Ok(table)
    }

    fn push_checked(
        &mut self,
        concept: Concept,
        row: Vec<f64>,
        line: usize,
        seen: &mut HashMap<String, usize>,
    ) -> Result<(), GraphError> {
        if row.is_empty() {
            return Err(GraphError::Parse {
                line,
                msg: "empty vector".into(),
            });
        }
        if self.concepts.is_empty() {
            self.dim = row.len();
        } else if row.len() != self.dim {
            return Err(GraphError::DimensionMismatch {
                line,
                got: row.len(),
                expected: self.dim,
            });
        }
        if row.iter().any(|x| !x.is_finite()) {
            return Err(GraphError::Parse {
                line,
                msg: format!("non-finite component for `{concept}`"),
            });
        }
        if row.iter().all(|&x| x == 0.0) {
            return Err(GraphError::ZeroVector {
                line,
                concept: concept.text().to_string(),
            });
        }
        if seen.insert(concept.text().to_string(), line).is_some() {
            return Err(GraphError::DuplicateConcept {
                line,
                concept: concept.text().to_string(),
            });
        }
        self.concepts.push(concept);
        self.vectors.extend_from_slice(&row);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.concepts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.concepts.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn concepts(&self) -> &[Concept] {
        &self.concepts
    }

    pub fn concept(&self, i: usize) -> &Concept {
        &self.concepts[i]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.vectors[i * self.dim..(i + 1) * self.dim]
    }

    pub fn index_of(&self, concept: &Concept) -> Option<usize> {
        self.concepts.iter().position(|c| c == concept)
    }
}

/// Cosine similarity, clamped into [-1, 1] against rounding drift.
pub fn cosine(u: &[f64], v: &[f64]) -> Result<f64, GraphError> {
    if u.len() != v.len() {
        return Err(GraphError::CosineDimensions(u.len(), v.len()));
    }
    let mut dot = 0.0;
    let mut nu = 0.0;
    let mut nv = 0.0;
    for (a, b) in u.iter().zip(v) {
        dot += a * b;
        nu += a * a;
        nv += b * b;
    }
    if nu == 0.0 || nv == 0.0 {
        return Err(GraphError::CosineZeroVector);
    }
    Ok((dot / (nu.sqrt() * nv.sqrt())).clamp(-1.0, 1.0))
}

/// Undirected weighted graph over embedding-table rows.
#[derive(Debug, Clone, PartialEq)]
pub struct SemanticGraph {
    n: usize,
    /// (i, j, weight) with i < j, ordered by (i, j).
    edges: Vec<(usize, usize, f64)>,
    adjacency: Vec<Vec<(usize, f64)>>,
}

impl SemanticGraph {
    pub fn from_edges(n: usize, mut edges: Vec<(usize, usize, f64)>) -> SemanticGraph {
        for e in &mut edges {
            if e.0 > e.1 {
                std::mem::swap(&mut e.0, &mut e.1);
            }
            assert!(e.0 < e.1, "self-loop rejected");
            assert!(e.1 < n, "edge endpoint out of range");
        }
        edges.sort_unstable_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        edges.dedup_by_key(|e| (e.0, e.1));
        let mut adjacency = vec![Vec::new(); n];
        for &(i, j, w) in &edges {
            adjacency[i].push((j, w));
            adjacency[j].push((i, w));
        }
        for list in &mut adjacency {
            list.sort_unstable_by_key(|&(j, _)| j);
        }
        SemanticGraph {
            n,
            edges,
            adjacency,
        }
    }

    pub fn n_nodes(&self) -> usize {
        self.n
    }

    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[(usize, usize, f64)] {
        &self.edges
    }

    /// Neighbors of `i` with edge weights, ordered by node index.
    pub fn neighbors(&self, i: usize) -> &[(usize, f64)] {
        &self.adjacency[i]
    }

    pub fn degree(&self, i: usize) -> usize {
        self.adjacency[i].len()
    }

    /// Sum of incident edge weights.
    pub fn weighted_degree(&self, i: usize) -> f64 {
        self.adjacency[i].iter().map(|&(_, w)| w).sum()
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        self.adjacency[i]
            .binary_search_by_key(&j, |&(k, _)| k)
            .is_ok()
    }

    /// Writes `i \t j \t weight` lines; weights round-trip exactly.
    pub fn save_edges(&self, path: &Path) -> Result<(), GraphError> {
        let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
        for &(i, j, w) in &self.edges {
            writeln!(out, "{i}\t{j}\t{w}")?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn load_edges(path: &Path, n: usize) -> Result<SemanticGraph, GraphError> {
        let file = std::fs::File::open(path)?;
        let mut edges = Vec::new();
        for (lineno, line) in BufReader::new(file).lines().enumerate() {
            let line = line?;
            let ln = lineno + 1;
            let trimmed = line.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let cols: Vec<&str> = trimmed.split('\t').collect();
            if cols.len() != 3 {
                return Err(GraphError::Parse {
                    line: ln,
                    msg: format!(
                        "expected `i \\t j \\t weight`, found {} columns",
                        cols.len()
                    ),
                });
            }
            let parse_idx = |s: &str| -> Result<usize, GraphError> {
                s.parse().map_err(|_| GraphError::Parse {
                    line: ln,
                    msg: format!("bad node index `{s}`"),
                })
            };
            let i = parse_idx(cols[0])?;
            let j = parse_idx(cols[1])?;
            let w: f64 = cols[2].parse().map_err(|_| GraphError::Parse {
                line: ln,
                msg: format!("bad weight `{}`", cols[2]),
            })?;
            if i >= n || j >= n {
                return Err(GraphError::Parse {
                    line: ln,
                    msg: format!("edge ({i}, {j}) exceeds node count {n}"),
                });
            }
            if i == j {
                return Err(GraphError::Parse {
                    line: ln,
                    msg: format!("self-loop on node {i}"),
                });
            }
            edges.push((i, j, w));
        }
        Ok(SemanticGraph::from_edges(n, edges))
    }
}

/// Writes the node index file `index \t concept`.
pub fn save_node_index(path: &Path, concepts: &[Concept]) -> Result<(), GraphError> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    for (i, c) in concepts.iter().enumerate() {
        writeln!(out, "{i}\t{c}")?;
    }
    out.flush()?;
    Ok(())
}

pub fn load_node_index(path: &Path) -> Result<Vec<Concept>, GraphError> {
    let file = std::fs::File::open(path)?;
    let mut out = Vec::new();
    for (lineno, line) in BufReader::new(file).lines().enumerate() {
        let line = line?;
        let n = lineno + 1;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let (idx, concept) = trimmed.split_once('\t').ok_or(GraphError::Parse {
            line: n,
            msg: "expected `index \\t concept`".into(),
        })?;
        let idx: usize = idx.parse().map_err(|_| GraphError::Parse {
            line: n,
            msg: format!("bad index `{idx}`"),
        })?;
        if idx != out.len() {
            return Err(GraphError::Parse {
                line: n,
                msg: format!("index {idx} out of sequence, expected {}", out.len()),
            });
        }
        out.push(Concept::new(concept).map_err(|e| GraphError::Parse {
            line: n,
            msg: e.to_string(),
        })?);
    }
    Ok(out)
}

/// Exact pairwise construction: edge (i, j) iff similarity > threshold.
pub fn build_graph(table: &EmbeddingTable, threshold: f64) -> SemanticGraph {
    let n = table.len();
    let mut edges = Vec::new();
    for i in 0..n {
        edges.extend(edges_from(table, threshold, i));
    }
    SemanticGraph::from_edges(n, edges)
}

/// Parallel construction over rows. Every pair is computed independently by
/// the same scalar routine, so the result is bit-identical to
/// [`build_graph`] for any thread count.
pub fn build_graph_parallel(table: &EmbeddingTable, threshold: f64) -> SemanticGraph {
    let n = table.len();
    let edges: Vec<(usize, usize, f64)> = (0..n)
        .into_par_iter()
        .map(|i| edges_from(table, threshold, i))
        .reduce(Vec::new, |mut acc, mut part| {
            acc.append(&mut part);
            acc
        });
    SemanticGraph::from_edges(n, edges)
}

fn edges_from(table: &EmbeddingTable, threshold: f64, i: usize) -> Vec<(usize, usize, f64)> {
    let mut out = Vec::new();
    let u = table.row(i);
    for j in (i + 1)..table.len() {
        let s = cosine(u, table.row(j)).expect("table rows are validated nonzero");
        if s > threshold {
            out.push((i, j, s));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(text: &str) -> Concept {
        Concept::new(text).unwrap()
    }

    fn table(rows: Vec<Vec<f64>>) -> EmbeddingTable {
        let concepts = (0..rows.len())
            .map(|i| c(&format!("concept n{i}")))
            .collect();
        EmbeddingTable::new(concepts, rows).unwrap()
    }

    #[test]
    fn cosine_basics() {
        let e = 1e-9;
        assert!((cosine(&[0.6, 0.8], &[0.6, 0.8]).unwrap() - 1.0).abs() < e);
        assert!(cosine(&[1.0, 0.0], &[0.0, 2.0]).unwrap().abs() < e);
        let got = cosine(&[1.0, 0.0], &[1.0, 1.0]).unwrap();
        assert!((got - 0.7071067812).abs() < 1e-9);
        assert!(matches!(
            cosine(&[0.0, 0.0], &[1.0, 0.0]),
            Err(GraphError::CosineZeroVector)
        ));
        assert!(matches!(
            cosine(&[1.0], &[1.0, 0.0]),
            Err(GraphError::CosineDimensions(1, 2))
        ));
    }

    #[test]
    fn threshold_is_strict() {
        // cosine((1,0), (4,3)) is exactly 4/5 = 0.8 in binary64
        let sim = cosine(&[1.0, 0.0], &[4.0, 3.0]).unwrap();
        assert_eq!(sim, 0.80);
        let g = build_graph(&table(vec![vec![1.0, 0.0], vec![4.0, 3.0]]), 0.80);
        assert_eq!(g.n_edges(), 0);
        // nudging one component over the line creates the edge
        let g = build_graph(&table(vec![vec![1.0, 0.0], vec![4.1, 3.0]]), 0.80);
        assert_eq!(g.n_edges(), 1);
    }

    #[test]
    fn two_of_three_pairs_pass() {
        // angles chosen so sims are approximately 0.90, 0.85 and 0.54; only
        // the first two clear the 0.80 threshold
        let a1 = 0.9f64.acos();
        let a2 = -(0.85f64.acos());
        let rows = vec![
            vec![1.0, 0.0],
            vec![a1.cos(), a1.sin()],
            vec![a2.cos(), a2.sin()],
        ];
        let g = build_graph(&table(rows), 0.80);
        assert_eq!(g.n_edges(), 2);
        let w01 = g.neighbors(0).iter().find(|&&(j, _)| j == 1).unwrap().1;
        let w02 = g.neighbors(0).iter().find(|&&(j, _)| j == 2).unwrap().1;
        assert!((w01 - 0.90).abs() < 1e-9);
        assert!((w02 - 0.85).abs() < 1e-9);
        assert!(!g.has_edge(1, 2));
    }

    #[test]
    fn single_node_graph_is_empty() {
        let g = build_graph(&table(vec![vec![1.0, 2.0]]), 0.80);
        assert_eq!(g.n_nodes(), 1);
        assert_eq!(g.n_edges(), 0);
    }

    #[test]
    fn load_rejects_bad_tables() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("emb.jsonl");

        std::fs::write(
            &path,
            "{\"concept\": \"cut tree\", \"vector\": [0.0, 0.0]}\n",
        )
        .unwrap();
        assert!(matches!(
            EmbeddingTable::load(&path),
            Err(GraphError::ZeroVector { line: 1, .. })
        ));

        std::fs::write(
            &path,
            "{\"concept\": \"cut tree\", \"vector\": [1.0]}\n{\"concept\": \"plant tree\", \"vector\": [1.0, 2.0]}\n",
        )
        .unwrap();
        assert!(matches!(
            EmbeddingTable::load(&path),
            Err(GraphError::DimensionMismatch {
                line: 2,
                got: 2,
                expected: 1
            })
        ));

        std::fs::write(
            &path,
            "{\"concept\": \"cut tree\", \"vector\": [1.0]}\n{\"concept\": \"cut tree\", \"vector\": [2.0]}\n",
        )
        .unwrap();
        assert!(matches!(
            EmbeddingTable::load(&path),
            Err(GraphError::DuplicateConcept { line: 2, .. })
        ));
    }

    #[test]
    fn edge_file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let rows: Vec<Vec<f64>> = (0..20)
            .map(|i| {
                let a = (i as f64) * 0.07;
                vec![a.cos(), a.sin()]
            })
            .collect();
        let t = table(rows);
        let g = build_graph(&t, 0.80);
        assert!(g.n_edges() > 0);

        let edges_path = dir.path().join("edges.tsv");
        let nodes_path = dir.path().join("nodes.tsv");
        g.save_edges(&edges_path).unwrap();
        save_node_index(&nodes_path, t.concepts()).unwrap();

        let loaded = SemanticGraph::load_edges(&edges_path, t.len()).unwrap();
        assert_eq!(loaded, g);
        assert_eq!(load_node_index(&nodes_path).unwrap(), t.concepts());
    }

    fn random_table(n: usize, dim: usize, seed: u64) -> EmbeddingTable {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|_| loop {
                let v: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
                if v.iter().any(|&x| x != 0.0) {
                    break v;
                }
            })
            .collect();
        table(rows)
    }

    #[test]
    fn parallel_construction_is_bit_identical() {
        let t = random_table(300, 8, 42);
        let serial = build_graph(&t, 0.80);
        let parallel = build_graph_parallel(&t, 0.80);
        assert_eq!(serial, parallel);
    }

    #[test]
    fn weights_reproduce_from_vectors() {
        let t = random_table(120, 6, 7);
        let g = build_graph(&t, 0.80);
        for &(i, j, w) in g.edges() {
            let again = cosine(t.row(i), t.row(j)).unwrap();
            assert!((again - w).abs() < 1e-9);
            assert!(w > 0.80 && w <= 1.0);
        }
    }

    #[test]
    fn degrees_invariant_under_row_permutation() {
        let t = random_table(60, 4, 11);
        let g = build_graph(&t, 0.75);

        // reverse the rows
        let rows: Vec<Vec<f64>> = (0..t.len()).rev().map(|i| t.row(i).to_vec()).collect();
        let permuted = table(rows);
        let gp = build_graph(&permuted, 0.75);

        let mut d1: Vec<usize> = (0..t.len()).map(|i| g.degree(i)).collect();
        let mut d2: Vec<usize> = (0..t.len()).map(|i| gp.degree(i)).collect();
        d2.reverse();
        assert_eq!(d1, d2);
        d1.sort_unstable();
        let mut d2s = d2;
        d2s.sort_unstable();
        assert_eq!(d1, d2s);
    }

    #[test]
    fn graph_is_symmetric() {
        let t = random_table(80, 5, 3);
        let g = build_graph(&t, 0.70);
        for &(i, j, w) in g.edges() {
            assert!(g.has_edge(i, j));
            assert!(g.has_edge(j, i));
            let wj = g.neighbors(j).iter().find(|&&(k, _)| k == i).unwrap().1;
            assert_eq!(w, wj);
        }
    }
}
