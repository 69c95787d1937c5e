//! Seed selection over the similarity graph: clustering, cluster quality
//! (CQI), consequential scores and the proportional per-cluster selection
//! algorithm.

use std::collections::BTreeMap;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use rayon::prelude::*;

use crate::graph::{cosine, EmbeddingTable, SemanticGraph};
use crate::kb::Concept;

/// Cluster id for noise points.
pub const NOISE: i64 = -1;

#[derive(Debug, thiserror::Error)]
pub enum SeedError {
    #[error("failed to read clustering file: {0}")]
    Io(#[from] std::io::Error),
    #[error("clustering file line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("clustering refers to node {node} but the table has {n} nodes")]
    UnknownNode { node: usize, n: usize },
    #[error("node {node} missing from clustering file")]
    MissingNode { node: usize },
    #[error("confidence {value} for node {node} outside [0, 1]")]
    BadConfidence { node: usize, value: f64 },
    #[error("CQI undefined for an empty clustering")]
    EmptyClustering,
}

/// Node-to-cluster assignment with per-node confidences. Cluster id −1
/// marks noise; noise nodes form one pseudo-cluster during selection.
#[derive(Debug, Clone, PartialEq)]
pub struct Clustering {
    assignment: Vec<i64>,
    confidence: Vec<f64>,
}

impl Clustering {
    pub fn new(assignment: Vec<i64>, confidence: Vec<f64>) -> Clustering {
        assert_eq!(assignment.len(), confidence.len());
        debug_assert!(confidence.iter().all(|c| (0.0..=1.0).contains(c)));
        Clustering {
            assignment,
            confidence,
        }
    }

    pub fn len(&self) -> usize {
        self.assignment.len()
    }

    pub fn is_empty(&self) -> bool {
        self.assignment.is_empty()
    }

    pub fn cluster_of(&self, node: usize) -> i64 {
        self.assignment[node]
    }

    pub fn confidence_of(&self, node: usize) -> f64 {
        self.confidence[node]
    }

    /// Members per cluster id, node indices ascending.
    pub fn clusters(&self) -> BTreeMap<i64, Vec<usize>> {
        let mut map: BTreeMap<i64, Vec<usize>> = BTreeMap::new();
        for (node, &cid) in self.assignment.iter().enumerate() {
            map.entry(cid).or_default().push(node);
        }
        map
    }

    /// Reads `node_index \t cluster_id \t confidence` covering every node of
    /// a table of `n` rows exactly once.
    pub fn load(path: &Path, n: usize) -> Result<Clustering, SeedError> {
        let file = std::fs::File::open(path)?;
        let mut assignment = vec![None; n];
        let mut confidence = vec![0.0; n];
        for (lineno, line) in BufReader::new(file).lines().enumerate() {
            let line = line?;
            let ln = lineno + 1;
            let trimmed = line.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let cols: Vec<&str> = trimmed.split('\t').collect();
            if cols.len() != 3 {
                return Err(SeedError::Parse {
                    line: ln,
                    msg: format!("expected 3 tab-separated columns, found {}", cols.len()),
                });
            }
            let node: usize = cols[0].parse().map_err(|_| SeedError::Parse {
                line: ln,
                msg: format!("bad node index `{}`", cols[0]),
            })?;
            if node >= n {
                return Err(SeedError::UnknownNode { node, n });
            }
            let cid: i64 = cols[1].parse().map_err(|_| SeedError::Parse {
                line: ln,
                msg: format!("bad cluster id `{}`", cols[1]),
            })?;
            let conf: f64 = cols[2].parse().map_err(|_| SeedError::Parse {
                line: ln,
                msg: format!("bad confidence `{}`", cols[2]),
            })?;
            if !(0.0..=1.0).contains(&conf) {
                return Err(SeedError::BadConfidence { node, value: conf });
            }
            if assignment[node].is_some() {
                return Err(SeedError::Parse {
                    line: ln,
                    msg: format!("node {node} assigned twice"),
                });
            }
            assignment[node] = Some(cid);
            confidence[node] = conf;
        }
        let mut out = Vec::with_capacity(n);
        for (node, cid) in assignment.into_iter().enumerate() {
            out.push(cid.ok_or(SeedError::MissingNode { node })?);
        }
        Ok(Clustering {
            assignment: out,
            confidence,
        })
    }

    pub fn save(&self, path: &Path) -> Result<(), SeedError> {
        let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
        for (node, (&cid, &conf)) in self.assignment.iter().zip(&self.confidence).enumerate() {
            writeln!(out, "{node}\t{cid}\t{conf}")?;
        }
        out.flush()?;
        Ok(())
    }
}

/// Built-in clustering baseline: connected components of the similarity
/// graph at `threshold`. Cluster ids follow the smallest member index.
/// Confidence is the cosine of a node to its cluster's mean vector, clipped
/// into [0, 1]; singleton clusters get confidence 0.
pub fn cluster_builtin(table: &EmbeddingTable, threshold: f64) -> Clustering {
    let n = table.len();
    if n == 0 {
        return Clustering::new(Vec::new(), Vec::new());
    }
    let graph = crate::graph::build_graph_parallel(table, threshold);

    // connected components by BFS in index order
    let mut component = vec![usize::MAX; n];
    let mut n_components = 0usize;
    for start in 0..n {
        if component[start] != usize::MAX {
            continue;
        }
        let id = n_components;
        n_components += 1;
        let mut queue = std::collections::VecDeque::from([start]);
        component[start] = id;
        while let Some(u) = queue.pop_front() {
            for &(v, _) in graph.neighbors(u) {
                if component[v] == usize::MAX {
                    component[v] = id;
                    queue.push_back(v);
                }
            }
        }
    }

    let mut members: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (node, &comp) in component.iter().enumerate() {
        members.entry(comp).or_default().push(node);
    }

    let dim = table.dim();
    let mut assignment = vec![0i64; n];
    let mut confidence = vec![0.0f64; n];
    for (&comp, nodes) in &members {
        for &node in nodes {
            assignment[node] = comp as i64;
        }
        if nodes.len() < 2 {
            continue; // singleton confidence stays 0
        }
        let mut centroid = vec![0.0f64; dim];
        for &node in nodes {
            for (c, x) in centroid.iter_mut().zip(table.row(node)) {
                *c += x;
            }
        }
        for c in &mut centroid {
            *c /= nodes.len() as f64;
        }
        let centroid_is_zero = centroid.iter().all(|&x| x == 0.0);
        for &node in nodes {
            confidence[node] = if centroid_is_zero {
                0.0
            } else {
                cosine(table.row(node), &centroid)
                    .expect("nonzero by construction")
                    .clamp(0.0, 1.0)
            };
        }
    }
    Clustering::new(assignment, confidence)
}

/// Confidence Quality Index: the fraction of nodes whose clustering
/// confidence strictly exceeds `tau` (0.60 in the published configuration).
pub fn cqi(clustering: &Clustering, tau: f64) -> Result<f64, SeedError> {
    if clustering.is_empty() {
        return Err(SeedError::EmptyClustering);
    }
    let hits = clustering.confidence.iter().filter(|&&a| a > tau).count();
    Ok(hits as f64 / clustering.len() as f64)
}

pub const DEFAULT_CQI_TAU: f64 = 0.60;
pub const DEFAULT_BETA: f64 = 0.01;

/// Number of unique edges of `node`: neighbors that no already-selected
/// seed of the node's cluster is connected to. With nothing selected this
/// is the plain degree.
pub fn consequential_score(graph: &SemanticGraph, node: usize, selected: &[usize]) -> usize {
    graph
        .neighbors(node)
        .iter()
        .filter(|&&(j, _)| !selected.iter().any(|&s| graph.has_edge(s, j)))
        .count()
}

/// Seeds chosen per cluster, in selection order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SeedSet {
    pub per_cluster: BTreeMap<i64, Vec<usize>>,
}

impl SeedSet {
    /// All seeds: clusters by ascending id, seeds in selection order.
    pub fn total(&self) -> Vec<usize> {
        self.per_cluster.values().flatten().copied().collect()
    }

    pub fn len(&self) -> usize {
        self.per_cluster.values().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn contains(&self, node: usize) -> bool {
        self.per_cluster.values().any(|v| v.contains(&node))
    }

    /// Writes `concept \t cluster_id \t selection_rank` rows.
    pub fn save(&self, path: &Path, concepts: &[Concept]) -> Result<(), SeedError> {
        let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
        for (&cid, seeds) in &self.per_cluster {
            for (rank, &node) in seeds.iter().enumerate() {
                writeln!(out, "{}\t{cid}\t{rank}", concepts[node])?;
            }
        }
        out.flush()?;
        Ok(())
    }
}

/// Reads seed rows back as (concept, cluster id, rank).
pub fn load_seed_rows(path: &Path) -> Result<Vec<(Concept, i64, usize)>, SeedError> {
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
            return Err(SeedError::Parse {
                line: ln,
                msg: format!("expected 3 tab-separated columns, found {}", cols.len()),
            });
        }
        let concept = Concept::new(cols[0]).map_err(|e| SeedError::Parse {
            line: ln,
            msg: e.to_string(),
        })?;
        let cid: i64 = cols[1].parse().map_err(|_| SeedError::Parse {
            line: ln,
            msg: format!("bad cluster id `{}`", cols[1]),
        })?;
        let rank: usize = cols[2].parse().map_err(|_| SeedError::Parse {
            line: ln,
            msg: format!("bad rank `{}`", cols[2]),
        })?;
        rows.push((concept, cid, rank));
    }
    Ok(rows)
}

/// Proportional seed selection.
///
/// A shared proportion P starts at T/N and moves in steps of `beta` while
/// the estimated total Σ max(1, ⌊P·|c|⌋) keeps approaching the target T;
/// the P with the smallest gap is kept. (The published pseudocode breaks
/// one adjustment past the optimum, which would discard the best P it just
/// found; with the best P retained, a target of T = N selects every node,
/// matching the algorithm's intent.) Each cluster then greedily takes its
/// quota by maximum consequential score, recomputed after every pick, ties
/// to the lowest node index. Quotas above the cluster size are capped.
pub fn select_seeds(
    graph: &SemanticGraph,
    clustering: &Clustering,
    target: usize,
    beta: f64,
) -> SeedSet {
    let clusters = clustering.clusters();
    let n: usize = clustering.len();
    if n == 0 || target == 0 {
        return SeedSet {
            per_cluster: BTreeMap::new(),
        };
    }

    let estimate = |p: f64| -> usize {
        clusters
            .values()
            .map(|members| std::cmp::max(1, (p * members.len() as f64).floor() as i64) as usize)
            .sum()
    };

    let mut p = target as f64 / n as f64;
    let mut best_p = p;
    let mut best_delta = usize::MAX;
    loop {
        let estimated = estimate(p);
        let delta = estimated.abs_diff(target);
        if delta >= best_delta {
            break;
        }
        best_delta = delta;
        best_p = p;
        if estimated < target {
            p += beta;
        } else {
            p -= beta;
        }
    }
    let p = best_p;

    let quotas: Vec<(i64, usize)> = clusters
        .iter()
        .map(|(&cid, members)| {
            let quota = std::cmp::max(1, (p * members.len() as f64).floor() as i64) as usize;
            if quota > members.len() {
                log::info!(
                    "cluster {cid}: quota {quota} exceeds size {}, capped",
                    members.len()
                );
            }
            (cid, quota.min(members.len()))
        })
        .collect();

    // clusters are independent; the merge keys on cluster id, so thread
    // count cannot affect the outcome
    let selected: Vec<(i64, Vec<usize>)> = quotas
        .into_par_iter()
        .map(|(cid, quota)| {
            let mut remaining: Vec<usize> = clusters[&cid].clone();
            let mut chosen: Vec<usize> = Vec::with_capacity(quota);
            while chosen.len() < quota {
                let mut best_node = remaining[0];
                let mut best_q = consequential_score(graph, best_node, &chosen);
                for &candidate in remaining.iter().skip(1) {
                    let q = consequential_score(graph, candidate, &chosen);
                    if q > best_q {
                        best_q = q;
                        best_node = candidate;
                    }
                }
                remaining.retain(|&x| x != best_node);
                chosen.push(best_node);
            }
            (cid, chosen)
        })
        .collect();

    SeedSet {
        per_cluster: selected.into_iter().collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::EmbeddingTable;

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
    fn cqi_counts_strictly_above_tau() {
        let cl = Clustering::new(vec![0, 0, 0], vec![0.9, 0.5, 0.7]);
        let got = cqi(&cl, 0.60).unwrap();
        assert!((got - 2.0 / 3.0).abs() < 1e-12);

        let all_high = Clustering::new(vec![0, 1], vec![1.0, 1.0]);
        assert_eq!(cqi(&all_high, 0.60).unwrap(), 1.0);

        // boundary value does not count
        let boundary = Clustering::new(vec![0], vec![0.60]);
        assert_eq!(cqi(&boundary, 0.60).unwrap(), 0.0);

        let empty = Clustering::new(vec![], vec![]);
        assert!(matches!(cqi(&empty, 0.60), Err(SeedError::EmptyClustering)));
    }

    #[test]
    fn clustering_file_round_trip_and_validation() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("clusters.tsv");
        let cl = Clustering::new(vec![0, 1, NOISE], vec![0.9, 0.8, 0.0]);
        cl.save(&path).unwrap();
        assert_eq!(Clustering::load(&path, 3).unwrap(), cl);

        // unknown node index
        std::fs::write(&path, "7\t0\t0.5\n").unwrap();
        assert!(matches!(
            Clustering::load(&path, 3),
            Err(SeedError::UnknownNode { node: 7, n: 3 })
        ));

        // missing node
        std::fs::write(&path, "0\t0\t0.5\n1\t0\t0.5\n").unwrap();
        assert!(matches!(
            Clustering::load(&path, 3),
            Err(SeedError::MissingNode { node: 2 })
        ));

        // out-of-range confidence
        std::fs::write(&path, "0\t0\t1.5\n1\t0\t0.5\n2\t0\t0.5\n").unwrap();
        assert!(matches!(
            Clustering::load(&path, 3),
            Err(SeedError::BadConfidence { node: 0, .. })
        ));
    }

    #[test]
    fn builtin_recovers_two_planted_blobs() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let mut rows = Vec::new();
        // two tight angular blobs around orthogonal directions
        for i in 0..20 {
            let base = if i < 10 {
                0.0
            } else {
                std::f64::consts::FRAC_PI_2
            };
            let angle: f64 = base + rng.gen_range(-0.05..0.05);
            rows.push(vec![angle.cos(), angle.sin()]);
        }
        let t = table(rows.clone());
        let cl = cluster_builtin(&t, 0.80);

        // membership matches the planted split, checked exhaustively
        for i in 0..20 {
            for j in 0..20 {
                let same_blob = (i < 10) == (j < 10);
                let same_cluster = cl.cluster_of(i) == cl.cluster_of(j);
                assert_eq!(same_blob, same_cluster, "nodes {i}, {j}");
            }
        }
        // tight blobs sit close to their centroids
        for i in 0..20 {
            assert!(cl.confidence_of(i) > 0.9);
        }
    }

    #[test]
    fn builtin_single_point_is_singleton_with_zero_confidence() {
        let t = table(vec![vec![0.3, 0.4]]);
        let cl = cluster_builtin(&t, 0.80);
        assert_eq!(cl.len(), 1);
        assert_eq!(cl.cluster_of(0), 0);
        assert_eq!(cl.confidence_of(0), 0.0);
    }

    #[test]
    fn builtin_on_empty_table_is_empty() {
        let t = EmbeddingTable::new(vec![], vec![]).unwrap();
        assert!(cluster_builtin(&t, 0.80).is_empty());
    }

    // star: 0 at center, leaves 1..=3; plus seed 4 adjacent to leaf 3
    fn star_graph() -> SemanticGraph {
        SemanticGraph::from_edges(5, vec![(0, 1, 0.9), (0, 2, 0.9), (0, 3, 0.9), (4, 3, 0.9)])
    }

    #[test]
    fn consequential_score_counts_unique_edges() {
        let g = star_graph();
        // nothing selected: plain degree
        assert_eq!(consequential_score(&g, 0, &[]), 3);
        // node 4 selected: leaf 3 is covered by it, two unique neighbors left
        assert_eq!(consequential_score(&g, 0, &[4]), 2);
        // isolated node
        let lonely = SemanticGraph::from_edges(2, vec![]);
        assert_eq!(consequential_score(&lonely, 0, &[]), 0);
    }

    #[test]
    fn two_triangles_one_seed_each() {
        // complete triangles {0,1,2} and {3,4,5}
        let g = SemanticGraph::from_edges(
            6,
            vec![
                (0, 1, 0.9),
                (0, 2, 0.9),
                (1, 2, 0.9),
                (3, 4, 0.9),
                (3, 5, 0.9),
                (4, 5, 0.9),
            ],
        );
        let cl = Clustering::new(vec![0, 0, 0, 1, 1, 1], vec![1.0; 6]);
        let seeds = select_seeds(&g, &cl, 2, DEFAULT_BETA);
        assert_eq!(seeds.len(), 2);
        // all triangle members tie at degree 2; lowest index wins
        assert_eq!(seeds.per_cluster[&0], vec![0]);
        assert_eq!(seeds.per_cluster[&1], vec![3]);
    }

    #[test]
    fn singleton_clusters_force_minimum_one_each() {
        let g = SemanticGraph::from_edges(4, vec![]);
        let cl = Clustering::new(vec![0, 1, 2, 3], vec![1.0; 4]);
        let seeds = select_seeds(&g, &cl, 1, DEFAULT_BETA);
        assert_eq!(seeds.len(), 4);
    }

    #[test]
    fn target_equal_to_node_count_selects_everything() {
        let g =
            SemanticGraph::from_edges(7, vec![(0, 1, 0.9), (2, 3, 0.9), (4, 5, 0.9), (5, 6, 0.9)]);
        let cl = Clustering::new(vec![0, 0, 1, 1, 2, 2, 2], vec![1.0; 7]);
        let seeds = select_seeds(&g, &cl, 7, DEFAULT_BETA);
        assert_eq!(seeds.len(), 7);
        let mut all = seeds.total();
        all.sort_unstable();
        assert_eq!(all, vec![0, 1, 2, 3, 4, 5, 6]);
    }

    #[test]
    fn noise_nodes_form_a_pseudo_cluster() {
        let g = SemanticGraph::from_edges(5, vec![(0, 1, 0.9), (3, 4, 0.85)]);
        let cl = Clustering::new(
            vec![0, 0, NOISE, NOISE, NOISE],
            vec![1.0, 1.0, 0.0, 0.0, 0.0],
        );
        let seeds = select_seeds(&g, &cl, 2, DEFAULT_BETA);
        assert!(seeds.per_cluster.contains_key(&NOISE));
        assert!(!seeds.per_cluster[&NOISE].is_empty());
    }

    #[test]
    fn seed_rows_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("seeds.tsv");
        let concepts: Vec<Concept> = (0..3).map(|i| c(&format!("concept n{i}"))).collect();
        let seeds = SeedSet {
            per_cluster: BTreeMap::from([(0, vec![2, 0]), (1, vec![1])]),
        };
        seeds.save(&path, &concepts).unwrap();
        let rows = load_seed_rows(&path).unwrap();
        assert_eq!(
            rows,
            vec![
                (c("concept n2"), 0, 0),
                (c("concept n0"), 0, 1),
                (c("concept n1"), 1, 0),
            ]
        );
    }

    mod properties {
        use super::*;
        use proptest::prelude::*;

        // random small graph + clustering with clusters of ≤ 6 nodes
        fn arb_case() -> impl Strategy<Value = (SemanticGraph, Clustering, usize)> {
            (2usize..12).prop_flat_map(|n| {
                let edges = prop::collection::vec(
                    (0..n, 0..n).prop_filter("no self-loops", |(a, b)| a != b),
                    0..(n * 2),
                );
                let assignment = prop::collection::vec(0i64..((n as i64 / 6) + 2), n);
                let target = 1usize..(n + 1);
                (Just(n), edges, assignment, target).prop_map(|(n, edges, assignment, target)| {
                    let edges = edges
                        .into_iter()
                        .map(|(a, b)| (a, b, 0.9))
                        .collect::<Vec<_>>();
                    let g = SemanticGraph::from_edges(n, edges);
                    let cl = Clustering::new(assignment, vec![1.0; n]);
                    (g, cl, target)
                })
            })
        }

        proptest! {
            #[test]
            fn greedy_picks_are_maximal_and_structure_holds((g, cl, target) in arb_case()) {
                let seeds = select_seeds(&g, &cl, target, DEFAULT_BETA);
                let clusters = cl.clusters();

                // every non-empty cluster contributed at least one seed
                for (cid, members) in &clusters {
                    let got = seeds.per_cluster.get(cid).map_or(0, Vec::len);
                    prop_assert!(got >= 1, "cluster {} empty-handed", cid);
                    prop_assert!(got <= members.len());
                }

                let total = seeds.total();
                let unique: std::collections::HashSet<_> = total.iter().collect();
                prop_assert_eq!(unique.len(), total.len(), "duplicate seeds");

                // replay the greedy argument: each pick maximal at its step,
                // ties resolved to the lowest index
                for (cid, picks) in &seeds.per_cluster {
                    let members = &clusters[cid];
                    prop_assert!(picks.iter().all(|p| members.contains(p)));
                    let mut chosen: Vec<usize> = Vec::new();
                    for &pick in picks {
                        let q_pick = consequential_score(&g, pick, &chosen);
                        for &other in members.iter().filter(|m| !chosen.contains(m)) {
                            let q_other = consequential_score(&g, other, &chosen);
                            prop_assert!(
                                q_other < q_pick || (q_other == q_pick && pick <= other),
                                "cluster {}: picked {} (Q={}) over {} (Q={})",
                                cid, pick, q_pick, other, q_other
                            );
                        }
                        chosen.push(pick);
                    }
                }
            }
        }
    }
}
