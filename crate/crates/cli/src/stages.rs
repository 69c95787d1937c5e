//! One function per pipeline stage. Every stage reads its inputs from
//! files and writes its outputs to files, so any stage can be rerun in
//! isolation. Inputs are loaded and checked before outputs are touched.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};

use esglex_core::analytics;
use esglex_core::annotate::{
    AnnotationCache, Annotator, Gateway, GatewayConfig, MockAnnotator, RemoteAnnotator,
};
use esglex_core::graph::{
    build_graph_parallel, load_node_index, save_node_index, EmbeddingTable, SemanticGraph,
};
use esglex_core::kb::{kb_stats, validate_triples, KnowledgeBase, Taxonomy};
use esglex_core::matcher::{self, Corpus, MatchMode};
use esglex_core::metrics::{self, Judgment};
use esglex_core::parser::{
    count_and_filter, parse_all, read_conllu_file, read_ranked, write_ranked, ParserConfig,
};
use esglex_core::propagate::{
    self, condition_propagated, read_seed_labels, split_by_topic_type, write_seed_labels,
    LabelMatrix,
};
use esglex_core::seeds::{cluster_builtin, cqi, load_seed_rows, select_seeds, Clustering};
use esglex_core::{Concept, Relation, Triple};

use crate::config::{BackendKind, Config};

pub type DynGateway = Gateway<Box<dyn Annotator>>;

pub fn build_gateway(cfg: &Config, cache: Option<&Path>) -> anyhow::Result<DynGateway> {
    let backend: Box<dyn Annotator> = match cfg.backend {
        BackendKind::Mock => Box::new(MockAnnotator::new()),
        BackendKind::Remote => Box::new(RemoteAnnotator::new(cfg.remote_config())),
    };
    let mut gateway = Gateway::new(backend).with_config(GatewayConfig {
        batch_size: cfg.batch_size,
        concurrency: cfg.concurrency,
    });
    if let Some(path) = cache {
        let cache = AnnotationCache::open(path)
            .with_context(|| format!("cannot open annotation cache {}", path.display()))?;
        gateway = gateway.with_cache(cache);
    }
    Ok(gateway)
}

pub fn load_taxonomy(path: Option<&Path>) -> anyhow::Result<Taxonomy> {
    match path {
        Some(p) => {
            Taxonomy::load(p).with_context(|| format!("cannot load taxonomy {}", p.display()))
        }
        None => Ok(Taxonomy::builtin()),
    }
}

fn load_kb(path: &Path, taxonomy: Taxonomy) -> anyhow::Result<KnowledgeBase> {
    let (kb, dropped) = KnowledgeBase::load(path, taxonomy)
        .with_context(|| format!("cannot load knowledge base {}", path.display()))?;
    if dropped > 0 {
        log::warn!(
            "{dropped} duplicate triple(s) dropped while loading {}",
            path.display()
        );
    }
    Ok(kb)
}

/// Extracts candidate concepts from dependency-parsed sentences and writes
/// the full frequency ranking.
pub fn parse(inputs: &[PathBuf], output: &Path) -> anyhow::Result<()> {
    let mut candidates = Vec::new();
    let config = ParserConfig::default();
    for path in inputs {
        let sentences = read_conllu_file(path)
            .with_context(|| format!("cannot read parsed sentences from {}", path.display()))?;
        log::info!("{}: {} sentences", path.display(), sentences.len());
        candidates.extend(parse_all(&sentences, &config));
    }
    let ranked = count_and_filter(candidates.into_iter().map(|c| c.concept), usize::MAX);
    write_ranked(output, &ranked)?;
    println!(
        "parse: {} distinct concepts -> {}",
        ranked.len(),
        output.display()
    );
    Ok(())
}

/// Keeps the `top_k` most frequent concepts.
pub fn filter(input: &Path, output: &Path, top_k: usize) -> anyhow::Result<()> {
    let mut ranked = read_ranked(input)
        .with_context(|| format!("cannot read ranked concepts {}", input.display()))?;
    ranked.sort_by(|(ca, na), (cb, nb)| nb.cmp(na).then_with(|| ca.cmp(cb)));
    ranked.truncate(top_k);
    write_ranked(output, &ranked)?;
    println!(
        "filter: kept {} concepts -> {}",
        ranked.len(),
        output.display()
    );
    Ok(())
}

/// Quality control: reorder scrambled phrases, then drop incoherent ones.
/// Counts of phrases that collapse onto the same reordering are summed.
pub fn qc(
    gateway: &DynGateway,
    input: &Path,
    output: &Path,
    rejected: Option<&Path>,
) -> anyhow::Result<()> {
    let ranked = read_ranked(input)
        .with_context(|| format!("cannot read ranked concepts {}", input.display()))?;
    let phrases: Vec<Concept> = ranked.iter().map(|(c, _)| c.clone()).collect();
    let reordered = gateway.reorder(&phrases);

    let mut merged: BTreeMap<Concept, usize> = BTreeMap::new();
    for (concept, (_, count)) in reordered.into_iter().zip(&ranked) {
        *merged.entry(concept).or_default() += count;
    }
    let mut candidates: Vec<(Concept, usize)> = merged.into_iter().collect();
    candidates.sort_by(|(ca, na), (cb, nb)| nb.cmp(na).then_with(|| ca.cmp(cb)));

    let phrases: Vec<Concept> = candidates.iter().map(|(c, _)| c.clone()).collect();
    let verdicts = gateway.coherence(&phrases);
    let mut kept = Vec::new();
    let mut dropped = Vec::new();
    for ((concept, count), verdict) in candidates.into_iter().zip(verdicts) {
        match verdict {
            Some(true) => kept.push((concept, count)),
            Some(false) => dropped.push((concept, "incoherent")),
            None => dropped.push((concept, "unresolved")),
        }
    }
    if let Some(path) = rejected {
        let lines: String = dropped
            .iter()
            .map(|(c, reason)| format!("{c}\t{reason}\n"))
            .collect();
        std::fs::write(path, lines)?;
    }
    write_ranked(output, &kept)?;
    println!(
        "qc: kept {} concepts, dropped {} -> {}",
        kept.len(),
        dropped.len(),
        output.display()
    );
    Ok(())
}

/// Loads embeddings, restricted and reordered to a concept list when one
/// is given. Concepts without an embedding are skipped with a warning.
fn load_embeddings(path: &Path, concepts: Option<&Path>) -> anyhow::Result<EmbeddingTable> {
    let table = EmbeddingTable::load(path)
        .with_context(|| format!("cannot load embeddings {}", path.display()))?;
    let Some(list) = concepts else {
        return Ok(table);
    };
    let ranked = read_ranked(list)
        .with_context(|| format!("cannot read ranked concepts {}", list.display()))?;
    let mut kept_concepts = Vec::new();
    let mut rows = Vec::new();
    let mut missing = 0usize;
    for (concept, _) in ranked {
        match table.index_of(&concept) {
            Some(i) => {
                rows.push(table.row(i).to_vec());
                kept_concepts.push(concept);
            }
            None => {
                log::warn!("no embedding for `{concept}`, skipped");
                missing += 1;
            }
        }
    }
    if missing > 0 {
        log::warn!("{missing} concept(s) had no embedding");
    }
    if kept_concepts.is_empty() {
        bail!("none of the concepts in {} have embeddings", list.display());
    }
    Ok(EmbeddingTable::new(kept_concepts, rows)?)
}

/// Builds the similarity graph and writes its edges plus the node index
/// that later stages use to map node ids back to concepts.
pub fn graph(
    embeddings: &Path,
    concepts: Option<&Path>,
    edges: &Path,
    nodes: &Path,
    threshold: f64,
) -> anyhow::Result<()> {
    let table = load_embeddings(embeddings, concepts)?;
    let graph = build_graph_parallel(&table, threshold);
    graph.save_edges(edges)?;
    save_node_index(nodes, table.concepts())?;
    println!(
        "graph: {} nodes, {} edges (threshold {threshold}) -> {}",
        graph.n_nodes(),
        graph.n_edges(),
        edges.display()
    );
    Ok(())
}

/// Clusters the node set by connected components of the similarity graph.
pub fn cluster(
    embeddings: &Path,
    nodes: &Path,
    output: &Path,
    threshold: f64,
) -> anyhow::Result<()> {
    let concepts = load_node_index(nodes)
        .with_context(|| format!("cannot read node index {}", nodes.display()))?;
    let table = EmbeddingTable::load(embeddings)
        .with_context(|| format!("cannot load embeddings {}", embeddings.display()))?;
    let mut rows = Vec::new();
    for concept in &concepts {
        match table.index_of(concept) {
            Some(i) => rows.push(table.row(i).to_vec()),
            None => bail!(
                "node `{concept}` has no embedding in {}",
                embeddings.display()
            ),
        }
    }
    let table = EmbeddingTable::new(concepts, rows)?;
    let clustering = cluster_builtin(&table, threshold);
    clustering.save(output)?;
    let n_clusters = clustering.clusters().len();
    println!(
        "cluster: {} nodes into {} clusters -> {}",
        clustering.len(),
        n_clusters,
        output.display()
    );
    Ok(())
}

/// Prints the clustering quality indicator; optionally writes it to a file.
pub fn cqi_stage(
    clusters: &Path,
    nodes: &Path,
    output: Option<&Path>,
    tau: f64,
) -> anyhow::Result<f64> {
    let concepts = load_node_index(nodes)
        .with_context(|| format!("cannot read node index {}", nodes.display()))?;
    let clustering = Clustering::load(clusters, concepts.len())
        .with_context(|| format!("cannot load clustering {}", clusters.display()))?;
    let value = cqi(&clustering, tau)?;
    println!("cqi\t{value}");
    if let Some(path) = output {
        std::fs::write(path, format!("{value}\n"))?;
    }
    Ok(value)
}

/// Picks seed nodes per cluster and writes them with cluster id and
/// selection rank.
pub fn seeds_stage(
    edges: &Path,
    nodes: &Path,
    clusters: &Path,
    output: &Path,
    target: usize,
    beta: f64,
) -> anyhow::Result<()> {
    let concepts = load_node_index(nodes)
        .with_context(|| format!("cannot read node index {}", nodes.display()))?;
    let n = concepts.len();
    let graph = SemanticGraph::load_edges(edges, n)
        .with_context(|| format!("cannot load graph edges {}", edges.display()))?;
    let clustering = Clustering::load(clusters, n)
        .with_context(|| format!("cannot load clustering {}", clusters.display()))?;
    let target = if target == 0 {
        ((n as f64) * 0.15).round().max(1.0) as usize
    } else {
        target
    };
    let seed_set = select_seeds(&graph, &clustering, target, beta);
    seed_set.save(output, &concepts)?;
    println!(
        "seeds: selected {} of {} nodes (target {target}) -> {}",
        seed_set.len(),
        n,
        output.display()
    );
    Ok(())
}

/// Annotates seed concepts through the hierarchical prompt flow and writes
/// the resulting seed labels.
pub fn annotate(
    gateway: &DynGateway,
    taxonomy: &Taxonomy,
    seeds: &Path,
    output: &Path,
) -> anyhow::Result<()> {
    let rows = load_seed_rows(seeds)
        .with_context(|| format!("cannot read seed set {}", seeds.display()))?;
    let concepts: Vec<Concept> = rows.into_iter().map(|(c, _, _)| c).collect();
    let annotations = gateway.annotate_seeds(&concepts, taxonomy);
    let mut labels: Vec<(Concept, Relation, String)> = Vec::new();
    let mut unrelated = 0usize;
    for annotation in &annotations {
        let triples = annotation.triples();
        if triples.is_empty() {
            unrelated += 1;
        }
        labels.extend(
            triples
                .into_iter()
                .map(|t| (t.concept, t.relation, t.topic)),
        );
    }
    write_seed_labels(output, &labels)?;
    println!(
        "annotate: {} labels for {} seeds ({} unrelated) -> {}",
        labels.len(),
        annotations.len(),
        unrelated,
        output.display()
    );
    Ok(())
}

/// Spreads seed labels over the graph, one propagation task per topic
/// type, then drops propagated labels that contradict their context.
pub fn propagate_stage(
    taxonomy: &Taxonomy,
    edges: &Path,
    nodes: &Path,
    labels: &Path,
    output: &Path,
    n_layers: usize,
    alpha: f64,
    tau_assign: f64,
) -> anyhow::Result<()> {
    let concepts = load_node_index(nodes)
        .with_context(|| format!("cannot read node index {}", nodes.display()))?;
    let n = concepts.len();
    let graph = SemanticGraph::load_edges(edges, n)
        .with_context(|| format!("cannot load graph edges {}", edges.display()))?;
    let seed_labels = read_seed_labels(labels)
        .with_context(|| format!("cannot read seed labels {}", labels.display()))?;

    let index: BTreeMap<&Concept, usize> =
        concepts.iter().enumerate().map(|(i, c)| (c, i)).collect();
    let (tasks, skipped) = split_by_topic_type(taxonomy, &seed_labels);
    if skipped > 0 {
        log::warn!("{skipped} seed label(s) named unknown topics");
    }

    let mut propagated: Vec<Triple> = Vec::new();
    for (topic_type, task_labels) in tasks {
        let mut seeds: Vec<(usize, Relation, String)> = Vec::new();
        for (concept, relation, topic) in task_labels {
            match index.get(&concept) {
                Some(&node) => seeds.push((node, relation, topic)),
                None => log::warn!("seed `{concept}` is not a graph node, skipped"),
            }
        }
        if seeds.is_empty() {
            continue;
        }
        let matrix = LabelMatrix::from_seeds(n, &seeds)?;
        let result = propagate::propagate(&graph, &matrix, n_layers, alpha)?;
        log::info!(
            "propagated {topic_type} labels: {} classes, {} iterations, converged: {}",
            matrix.n_classes(),
            result.iterations,
            result.converged
        );
        propagated.extend(propagate::assign_labels(
            &result.matrix,
            &concepts,
            tau_assign,
        ));
    }

    let (kept, dropped) = condition_propagated(taxonomy, propagated);
    let (kb, _) = KnowledgeBase::from_triples(taxonomy.clone(), kept);
    kb.save(output)?;
    println!(
        "propagate: {} propagated labels kept, {dropped} dropped -> {}",
        kb.len(),
        output.display()
    );
    Ok(())
}

/// Combines seed labels and propagated triples into the knowledge base.
pub fn build_kb(
    taxonomy: &Taxonomy,
    seed_labels: &Path,
    propagated: Option<&Path>,
    output: &Path,
) -> anyhow::Result<()> {
    let labels = read_seed_labels(seed_labels)
        .with_context(|| format!("cannot read seed labels {}", seed_labels.display()))?;
    let mut triples: Vec<Triple> = labels
        .into_iter()
        .map(|(concept, relation, topic)| Triple::seed(concept, relation, topic))
        .collect();
    let n_seeds = triples.len();
    if let Some(path) = propagated {
        let extra = load_kb(path, taxonomy.clone())?;
        triples.extend(extra.triples().iter().cloned());
    }
    let total = triples.len();
    let (kb, duplicates) = KnowledgeBase::from_triples(taxonomy.clone(), triples);
    kb.save(output)?;
    println!(
        "build-kb: {} triples ({n_seeds} seed, {} propagated, {duplicates} duplicate) -> {}",
        kb.len(),
        total - n_seeds,
        output.display()
    );
    Ok(())
}

/// Checks the KB against the validation rules. Violations are printed one
/// per line and make the command fail.
pub fn validate(taxonomy: &Taxonomy, kb_path: &Path) -> anyhow::Result<()> {
    let kb = load_kb(kb_path, taxonomy.clone())?;
    let report = validate_triples(&kb);
    if report.is_clean() {
        println!("validate: {} triples, no violations", kb.len());
        return Ok(());
    }
    for violation in &report.violations {
        println!("{violation}");
    }
    bail!("{} validation violation(s)", report.len());
}

/// Prints the per-topic triple table with totals.
pub fn stats(taxonomy: &Taxonomy, kb_path: &Path, output: Option<&Path>) -> anyhow::Result<()> {
    let kb = load_kb(kb_path, taxonomy.clone())?;
    let table = kb_stats(&kb);
    let tsv = table.to_tsv();
    print!("{tsv}");
    println!("total triples\t{}", table.total_triples);
    println!("unique concepts\t{}", table.unique_concepts);
    if let Some(path) = output {
        std::fs::write(path, &tsv)?;
    }
    Ok(())
}

/// Reads report files into a corpus: `.jsonl` files as one document per
/// line, anything else as one plain-text document named by file stem.
pub fn load_corpus(paths: &[PathBuf]) -> anyhow::Result<Corpus> {
    let mut corpus = Corpus::default();
    for path in paths {
        if path.extension().is_some_and(|e| e == "jsonl") {
            let part = Corpus::load_jsonl(path)
                .with_context(|| format!("cannot load corpus {}", path.display()))?;
            corpus.documents.extend(part.documents);
        } else {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("cannot read corpus file {}", path.display()))?;
            let doc_id = path
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| path.display().to_string());
            corpus
                .documents
                .push(matcher::tokenize_report(&doc_id, &text));
        }
    }
    Ok(corpus)
}

/// Finds KB concepts in the corpus and writes the match table.
pub fn match_stage(
    taxonomy: &Taxonomy,
    kb_path: &Path,
    corpus_paths: &[PathBuf],
    mode: MatchMode,
    output: &Path,
) -> anyhow::Result<()> {
    let kb = load_kb(kb_path, taxonomy.clone())?;
    let corpus = load_corpus(corpus_paths)?;
    let matches = matcher::run_matcher(&kb, &corpus, mode);
    matcher::write_matches(output, &matches)?;
    println!(
        "match: {} {} matches over {} sentences -> {}",
        matches.len(),
        mode.as_str(),
        corpus.n_sentences(),
        output.display()
    );
    Ok(())
}

/// Builds the topic-frequency report from a match table.
pub fn analyze(
    taxonomy: &Taxonomy,
    kb_path: &Path,
    matches_path: &Path,
    output: &Path,
    csv: Option<&Path>,
    top_concepts: usize,
) -> anyhow::Result<()> {
    let kb = load_kb(kb_path, taxonomy.clone())?;
    let matches = matcher::read_matches(matches_path)
        .with_context(|| format!("cannot read matches {}", matches_path.display()))?;
    let report = analytics::build_report(&matches, &kb, top_concepts)?;
    std::fs::write(output, report.to_json()?)?;
    if let Some(path) = csv {
        std::fs::write(path, report.to_csv())?;
    }
    println!(
        "analyze: {} matches, {} unattributed -> {}",
        matches.len(),
        report.unattributed,
        output.display()
    );
    Ok(())
}

/// Judges lexicon terms and reports quality metrics. With two judgment
/// files the judge agreement is reported as well; with none the terms are
/// judged through the annotation gateway first.
#[allow(clippy::too_many_arguments)]
pub fn eval(
    gateway: &DynGateway,
    judge_name: &str,
    matches_path: Option<&Path>,
    terms_path: Option<&Path>,
    judgment_paths: &[PathBuf],
    save_judgments: Option<&Path>,
    output: Option<&Path>,
) -> anyhow::Result<()> {
    let mut raw_terms: Vec<String> = Vec::new();
    if let Some(path) = matches_path {
        let matches = matcher::read_matches(path)
            .with_context(|| format!("cannot read matches {}", path.display()))?;
        raw_terms.extend(matches.into_iter().map(|m| m.concept.text().to_string()));
    }
    if let Some(path) = terms_path {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("cannot read term list {}", path.display()))?;
        raw_terms.extend(text.lines().map(str::to_string));
    }
    let terms = metrics::collect_topic_terms(raw_terms);
    if terms.is_empty() {
        bail!("no terms to evaluate; pass --matches and/or --terms");
    }

    let judgments: Vec<Judgment> = if judgment_paths.is_empty() {
        let (judged, undecided) = metrics::judge_terms(gateway, &terms, judge_name);
        if !undecided.is_empty() {
            log::warn!("{} term(s) left undecided by the judge", undecided.len());
        }
        if let Some(path) = save_judgments {
            metrics::write_judgments(path, &judged)?;
        }
        judged
    } else {
        metrics::read_judgments(&judgment_paths[0])
            .with_context(|| format!("cannot read judgments {}", judgment_paths[0].display()))?
    };

    let m = metrics::aggregate_metrics(&terms, &judgments)?;
    let mut lines = format!(
        "terms\t{}\nesg_unique\t{}\nesg_rel\t{}\nesg_act\t{}\n",
        terms.len(),
        m.esg_unique,
        m.esg_rel,
        m.esg_act
    );
    if judgment_paths.len() >= 2 {
        let other = metrics::read_judgments(&judgment_paths[1])
            .with_context(|| format!("cannot read judgments {}", judgment_paths[1].display()))?;
        let a = metrics::agreement(&judgments, &other)?;
        lines.push_str(&format!(
            "agreement_esg_related\t{}\nagreement_action_oriented\t{}\n",
            a.esg_related, a.action_oriented
        ));
    }
    print!("{lines}");
    if let Some(path) = output {
        std::fs::write(path, lines)?;
    }
    Ok(())
}
