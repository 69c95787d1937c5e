//! Pluggable phrase annotator: quality control (reorder, coherence), seed
//! labelling (pillar, relation-topic) following the hierarchical flow, and
//! the relatedness/action judgments used by evaluation. Backends answer raw
//! task batches; the gateway owns prompts, caching, guards and fallbacks.

mod cache;
mod mock;
mod remote;

pub use cache::AnnotationCache;
pub use mock::MockAnnotator;
pub use remote::{RemoteAnnotator, RemoteConfig};

use std::collections::BTreeMap;
use std::sync::Mutex;

use sha2::{Digest, Sha256};

use crate::kb::{Concept, Pillar, Relation, Taxonomy, Topic, TopicType, Triple};

pub const DEFAULT_BATCH_SIZE: usize = 20;
pub const DEFAULT_CONCURRENCY: usize = 4;

#[derive(Debug, thiserror::Error)]
pub enum AnnotateError {
    #[error("cache I/O failed: {0}")]
    Io(#[from] std::io::Error),
    #[error("API key environment variable {0} is not set")]
    MissingApiKey(String),
    #[error("backend returned HTTP {status}: {body}")]
    Http { status: u16, body: String },
    #[error("transport failure: {0}")]
    Transport(String),
    #[error("malformed backend payload: {0}")]
    BadPayload(String),
}

/// The annotation tasks the gateway can run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum TaskKind {
    Reorder,
    Coherence,
    Pillar,
    RelationTopic,
    EsgRelated,
    ActionOriented,
}

impl TaskKind {
    pub fn slug(self) -> &'static str {
        match self {
            TaskKind::Reorder => "reorder",
            TaskKind::Coherence => "coherence",
            TaskKind::Pillar => "pillar",
            TaskKind::RelationTopic => "relation-topic",
            TaskKind::EsgRelated => "esg-related",
            TaskKind::ActionOriented => "action-oriented",
        }
    }
}

/// A fully rendered task: the prompt sent to the backend plus the candidate
/// topics in play (relation-topic only). The id folds in a digest of the
/// rendered prompt so cached answers are invalidated when the template or
/// the candidate definitions change.
#[derive(Debug, Clone)]
pub struct Task {
    pub kind: TaskKind,
    pub prompt: String,
    pub candidates: Vec<String>,
    pub id: String,
}

impl Task {
    pub fn new(kind: TaskKind, prompt: String, candidates: Vec<String>) -> Task {
        let digest = Sha256::digest(prompt.as_bytes());
        let hex: String = digest.iter().take(6).map(|b| format!("{b:02x}")).collect();
        let id = format!("{}#{hex}", kind.slug());
        Task {
            kind,
            prompt,
            candidates,
            id,
        }
    }
}

/// A backend answers one batch of inputs for a task. The returned vector is
/// parallel to `inputs`; `None` marks an item the backend produced no
/// usable answer for. `Err` is a whole-batch transport failure.
pub trait Annotator: Send + Sync {
    fn complete(
        &self,
        task: &Task,
        inputs: &[String],
    ) -> Result<Vec<Option<String>>, AnnotateError>;
}

impl Annotator for Box<dyn Annotator> {
    fn complete(
        &self,
        task: &Task,
        inputs: &[String],
    ) -> Result<Vec<Option<String>>, AnnotateError> {
        (**self).complete(task, inputs)
    }
}

/// Prompt templates with the taxonomy definitions that fill their
/// {definitions} slots.
#[derive(Debug, Clone)]
pub struct PromptLibrary {
    reorder: String,
    coherence: String,
    pillar: String,
    relation_topic: String,
    esg_related: String,
    action_oriented: String,
    definitions: BTreeMap<String, String>,
}

impl PromptLibrary {
    /// Templates and topic definitions compiled into the library.
    pub fn builtin() -> PromptLibrary {
        let mut definitions = BTreeMap::new();
        for (lineno, line) in include_str!("../../assets/topic_definitions.tsv")
            .lines()
            .enumerate()
        {
            let trimmed = line.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let Some((name, definition)) = trimmed.split_once('\t') else {
                panic!("topic_definitions.tsv line {}: missing tab", lineno + 1);
            };
            definitions.insert(name.trim().to_lowercase(), definition.trim().to_string());
        }
        PromptLibrary {
            reorder: include_str!("../../assets/prompts/reorder.txt").to_string(),
            coherence: include_str!("../../assets/prompts/coherence.txt").to_string(),
            pillar: include_str!("../../assets/prompts/pillar.txt").to_string(),
            relation_topic: include_str!("../../assets/prompts/relation_topic.txt").to_string(),
            esg_related: include_str!("../../assets/prompts/esg_related.txt").to_string(),
            action_oriented: include_str!("../../assets/prompts/action_oriented.txt").to_string(),
            definitions,
        }
    }

    /// `Name: definition` lines for the given topics; topics without a
    /// stored definition fall back to their bare name.
    fn definitions_block(&self, topics: &[&Topic]) -> String {
        topics
            .iter()
            .map(|t| match self.definitions.get(&t.name.to_lowercase()) {
                Some(d) => format!("{}: {}", t.name, d),
                None => {
                    log::warn!("no stored definition for topic `{}`", t.name);
                    t.name.clone()
                }
            })
            .collect::<Vec<_>>()
            .join("\n")
    }

    pub fn reorder_task(&self) -> Task {
        Task::new(TaskKind::Reorder, self.reorder.clone(), Vec::new())
    }

    pub fn coherence_task(&self) -> Task {
        Task::new(TaskKind::Coherence, self.coherence.clone(), Vec::new())
    }

    pub fn pillar_task(&self, taxonomy: &Taxonomy) -> Task {
        let pillars: Vec<&Topic> = taxonomy.topics_of_type(TopicType::Pillar).collect();
        let prompt = self
            .pillar
            .replace("{definitions}", &self.definitions_block(&pillars));
        Task::new(TaskKind::Pillar, prompt, Vec::new())
    }

    /// Candidates must share one topic type; their canonical names become
    /// the task's candidate set.
    pub fn relation_topic_task(&self, candidates: &[&Topic]) -> Task {
        assert!(!candidates.is_empty(), "empty candidate set");
        let tt = candidates[0].topic_type;
        assert!(
            candidates.iter().all(|t| t.topic_type == tt),
            "candidate topics must share one topic type"
        );
        let prompt = self
            .relation_topic
            .replace("{definitions}", &self.definitions_block(candidates));
        let names = candidates.iter().map(|t| t.name.clone()).collect();
        Task::new(TaskKind::RelationTopic, prompt, names)
    }

    pub fn esg_related_task(&self) -> Task {
        Task::new(TaskKind::EsgRelated, self.esg_related.clone(), Vec::new())
    }

    pub fn action_oriented_task(&self) -> Task {
        Task::new(
            TaskKind::ActionOriented,
            self.action_oriented.clone(),
            Vec::new(),
        )
    }
}

/// The four pillar answers of the pillar prompt.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum PillarLabel {
    Environmental,
    Social,
    Governance,
    Others,
}

impl PillarLabel {
    pub fn as_pillar(self) -> Option<Pillar> {
        match self {
            PillarLabel::Environmental => Some(Pillar::Environmental),
            PillarLabel::Social => Some(Pillar::Social),
            PillarLabel::Governance => Some(Pillar::Governance),
            PillarLabel::Others => None,
        }
    }

    fn parse(response: &str) -> Option<PillarLabel> {
        match normalize_answer(response).as_str() {
            "environmental" => Some(PillarLabel::Environmental),
            "social" => Some(PillarLabel::Social),
            "governance" => Some(PillarLabel::Governance),
            "others" | "other" => Some(PillarLabel::Others),
            _ => None,
        }
    }
}

impl std::fmt::Display for PillarLabel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            PillarLabel::Environmental => "Environmental",
            PillarLabel::Social => "Social",
            PillarLabel::Governance => "Governance",
            PillarLabel::Others => "Others",
        };
        f.write_str(s)
    }
}

/// One concept's full hierarchical annotation.
#[derive(Debug, Clone, PartialEq)]
pub struct SeedAnnotation {
    pub concept: Concept,
    pub pillar: PillarLabel,
    /// relation-topic results in level order: broad, cross-broad, sub,
    /// cross-sub; levels answered not-applicable are absent
    pub relations: Vec<(Relation, String)>,
}

impl SeedAnnotation {
    /// Seed triples: aligns_with for the pillar (when not Others) plus one
    /// triple per relation-topic result.
    pub fn triples(&self) -> Vec<Triple> {
        let mut out = Vec::new();
        if let Some(p) = self.pillar.as_pillar() {
            out.push(Triple::seed(
                self.concept.clone(),
                Relation::AlignsWith,
                p.as_str(),
            ));
        }
        for (relation, topic) in &self.relations {
            out.push(Triple::seed(self.concept.clone(), *relation, topic.clone()));
        }
        out
    }
}

fn strip_outer(s: &str, open: char, close: char) -> &str {
    let t = s.trim();
    match t.strip_prefix(open).and_then(|x| x.strip_suffix(close)) {
        Some(inner) => inner.trim(),
        None => t,
    }
}

/// Trims wrapping quotes/backticks/periods and lowercases.
fn normalize_answer(s: &str) -> String {
    let mut t = s.trim();
    loop {
        let before = t;
        t = strip_outer(t, '`', '`');
        t = strip_outer(t, '\'', '\'');
        t = strip_outer(t, '"', '"');
        t = t.trim_end_matches('.').trim();
        if t == before {
            break;
        }
    }
    t.to_lowercase()
}

fn parse_bool_answer(response: &str, yes: &str, no: &str) -> Option<bool> {
    let norm = normalize_answer(response);
    if norm == yes {
        Some(true)
    } else if norm == no {
        Some(false)
    } else {
        None
    }
}

/// Parses `(relationship, topic)` or `not applicable`; enforces the
/// candidate set and the supports/undermines relation set.
fn parse_relation_topic(
    response: &str,
    candidates: &[String],
) -> Option<Option<(Relation, String)>> {
    let norm = normalize_answer(response);
    if norm.contains("not applicable") || norm == "n/a" {
        return Some(None);
    }
    let inner = strip_outer(&norm, '(', ')');
    let (rel_raw, topic_raw) = inner.split_once(',')?;
    let relation = match rel_raw.trim().trim_matches('\'').trim_matches('"') {
        "supports" | "support" => Relation::Supports,
        "undermines" | "undermine" => Relation::Undermines,
        _ => return None,
    };
    let topic_norm = topic_raw.trim().trim_matches('\'').trim_matches('"').trim();
    let canonical = candidates.iter().find(|c| c.to_lowercase() == topic_norm)?;
    Some(Some((relation, canonical.clone())))
}

pub struct GatewayConfig {
    pub batch_size: usize,
    pub concurrency: usize,
}

impl Default for GatewayConfig {
    fn default() -> GatewayConfig {
        GatewayConfig {
            batch_size: DEFAULT_BATCH_SIZE,
            concurrency: DEFAULT_CONCURRENCY,
        }
    }
}

/// Front door for all annotation work. Splits inputs into batches, fans
/// them out over a bounded number of in-flight requests, resolves repeats
/// from the cache, enforces the response guards, and retries a format
/// violation once before falling back.
pub struct Gateway<A: Annotator> {
    backend: A,
    prompts: PromptLibrary,
    cache: Option<Mutex<AnnotationCache>>,
    config: GatewayConfig,
}

impl<A: Annotator> Gateway<A> {
    pub fn new(backend: A) -> Gateway<A> {
        Gateway {
            backend,
            prompts: PromptLibrary::builtin(),
            cache: None,
            config: GatewayConfig::default(),
        }
    }

    pub fn with_cache(mut self, cache: AnnotationCache) -> Gateway<A> {
        self.cache = Some(Mutex::new(cache));
        self
    }

    pub fn with_config(mut self, config: GatewayConfig) -> Gateway<A> {
        assert!(config.batch_size > 0 && config.concurrency > 0);
        self.config = config;
        self
    }

    pub fn prompts(&self) -> &PromptLibrary {
        &self.prompts
    }

    /// Raw per-input responses: cache hits first, the rest batched to the
    /// backend. Fresh responses are appended to the cache.
    fn raw_responses(&self, task: &Task, inputs: &[String]) -> Vec<Option<String>> {
        let mut out: Vec<Option<String>> = vec![None; inputs.len()];
        let mut pending: Vec<usize> = Vec::new();
        if let Some(cache) = &self.cache {
            let cache = cache.lock().expect("cache lock");
            for (i, input) in inputs.iter().enumerate() {
                match cache.get(input, &task.id) {
                    Some(hit) => out[i] = Some(hit.to_string()),
                    None => pending.push(i),
                }
            }
        } else {
            pending = (0..inputs.len()).collect();
        }
        if pending.is_empty() {
            return out;
        }

        let fresh = self.request(task, inputs, &pending);
        if let Some(cache) = &self.cache {
            let mut cache = cache.lock().expect("cache lock");
            for (&i, response) in pending.iter().zip(&fresh) {
                if let Some(r) = response {
                    if let Err(e) = cache.put(&inputs[i], &task.id, r) {
                        log::warn!("cache append failed: {e}");
                    }
                }
            }
        }
        for (&i, response) in pending.iter().zip(fresh.into_iter()) {
            out[i] = response;
        }
        out
    }

    /// Sends the selected inputs in batches, at most `concurrency` batches
    /// in flight at once. Output is parallel to `selected`.
    fn request(&self, task: &Task, inputs: &[String], selected: &[usize]) -> Vec<Option<String>> {
        let batches: Vec<&[usize]> = selected.chunks(self.config.batch_size).collect();
        let mut per_batch: Vec<Vec<Option<String>>> = Vec::with_capacity(batches.len());
        for wave in batches.chunks(self.config.concurrency) {
            let wave_results: Vec<Vec<Option<String>>> = std::thread::scope(|scope| {
                let handles: Vec<_> = wave
                    .iter()
                    .map(|batch| {
                        let batch_inputs: Vec<String> =
                            batch.iter().map(|&i| inputs[i].clone()).collect();
                        scope.spawn(move || match self.backend.complete(task, &batch_inputs) {
                            Ok(answers) if answers.len() == batch_inputs.len() => answers,
                            Ok(answers) => {
                                log::warn!(
                                    "{}: backend answered {} items for {} inputs",
                                    task.id,
                                    answers.len(),
                                    batch_inputs.len()
                                );
                                vec![None; batch_inputs.len()]
                            }
                            Err(e) => {
                                log::warn!("{}: batch failed: {e}", task.id);
                                vec![None; batch_inputs.len()]
                            }
                        })
                    })
                    .collect();
                handles
                    .into_iter()
                    .map(|h| h.join().expect("annotation worker panicked"))
                    .collect()
            });
            per_batch.extend(wave_results);
        }
        per_batch.into_iter().flatten().collect()
    }

    /// Resolves a task through parse + one repair-retry. The fallback for
    /// items that still fail is the caller's business; they come back as
    /// `None`.
    fn resolved<T, F>(&self, task: &Task, inputs: &[String], parse: F) -> Vec<Option<T>>
    where
        F: Fn(&str) -> Option<T>,
    {
        let raw = self.raw_responses(task, inputs);
        let mut out: Vec<Option<T>> = Vec::with_capacity(inputs.len());
        let mut failing: Vec<usize> = Vec::new();
        for (i, response) in raw.iter().enumerate() {
            match response.as_deref().and_then(&parse) {
                Some(v) => out.push(Some(v)),
                None => {
                    out.push(None);
                    failing.push(i);
                }
            }
        }
        if failing.is_empty() {
            return out;
        }

        // one repair pass straight at the backend, skipping stale cache
        let repaired = self.request(task, inputs, &failing);
        if let Some(cache) = &self.cache {
            let mut cache = cache.lock().expect("cache lock");
            for (&i, response) in failing.iter().zip(&repaired) {
                if let Some(r) = response {
                    if let Err(e) = cache.put(&inputs[i], &task.id, r) {
                        log::warn!("cache append failed: {e}");
                    }
                }
            }
        }
        for (&i, response) in failing.iter().zip(repaired.into_iter()) {
            match response.as_deref().and_then(&parse) {
                Some(v) => out[i] = Some(v),
                None => log::warn!("{}: `{}` unresolved after repair retry", task.id, inputs[i]),
            }
        }
        out
    }

    /// Reorders phrases for coherence. A response must be a permutation of
    /// the input's words; anything else keeps the original.
    pub fn reorder(&self, phrases: &[Concept]) -> Vec<Concept> {
        let task = self.prompts.reorder_task();
        let inputs: Vec<String> = phrases.iter().map(|c| c.text().to_string()).collect();
        let answers = self.resolved(&task, &inputs, |r| {
            let t = r.trim();
            (!t.is_empty()).then(|| t.to_string())
        });
        phrases
            .iter()
            .zip(answers)
            .map(|(original, answer)| {
                let Some(text) = answer else {
                    return original.clone();
                };
                match Concept::new(&text) {
                    Ok(candidate) if candidate.word_multiset() == original.word_multiset() => {
                        candidate
                    }
                    _ => {
                        log::warn!(
                            "reorder for `{original}` returned `{text}`, word set differs; kept original"
                        );
                        original.clone()
                    }
                }
            })
            .collect()
    }

    /// Intelligibility judgment; `None` marks an undecided phrase, which
    /// callers exclude.
    pub fn coherence(&self, phrases: &[Concept]) -> Vec<Option<bool>> {
        let task = self.prompts.coherence_task();
        let inputs: Vec<String> = phrases.iter().map(|c| c.text().to_string()).collect();
        let out = self.resolved(&task, &inputs, |r| parse_bool_answer(r, "true", "false"));
        for (phrase, decision) in phrases.iter().zip(&out) {
            if decision.is_none() {
                log::warn!("coherence undecided for `{phrase}`, excluded");
            }
        }
        out
    }

    /// One of the four pillar labels per phrase; unparseable responses
    /// degrade to Others.
    pub fn classify_pillar(&self, phrases: &[Concept], taxonomy: &Taxonomy) -> Vec<PillarLabel> {
        let task = self.prompts.pillar_task(taxonomy);
        let inputs: Vec<String> = phrases.iter().map(|c| c.text().to_string()).collect();
        self.resolved(&task, &inputs, |r| PillarLabel::parse(r))
            .into_iter()
            .zip(phrases)
            .map(|(label, phrase)| {
                label.unwrap_or_else(|| {
                    log::warn!("pillar for `{phrase}` unusable, labelled Others");
                    PillarLabel::Others
                })
            })
            .collect()
    }

    /// Relation and topic for each phrase against one candidate set, or
    /// `None` (not applicable). Topics outside the candidate set and
    /// malformed answers degrade to `None`.
    pub fn classify_relation_topic(
        &self,
        phrases: &[Concept],
        candidates: &[&Topic],
    ) -> Vec<Option<(Relation, String)>> {
        let task = self.prompts.relation_topic_task(candidates);
        let inputs: Vec<String> = phrases.iter().map(|c| c.text().to_string()).collect();
        self.resolved(&task, &inputs, |r| {
            parse_relation_topic(r, &task.candidates)
        })
        .into_iter()
        .map(Option::flatten)
        .collect()
    }

    /// Judge: is the term ESG-related?
    pub fn esg_related(&self, terms: &[String]) -> Vec<Option<bool>> {
        let task = self.prompts.esg_related_task();
        self.resolved(&task, terms, |r| parse_bool_answer(r, "esg", "non-esg"))
    }

    /// Judge: does the term express an ESG action?
    pub fn action_oriented(&self, terms: &[String]) -> Vec<Option<bool>> {
        let task = self.prompts.action_oriented_task();
        self.resolved(&task, terms, |r| parse_bool_answer(r, "true", "false"))
    }

    /// Runs the hierarchical flow for a batch: pillar first; Others stops;
    /// otherwise relation-topic at the broad level (plus cross-broad for
    /// Environmental), then within the chosen parent's children at the sub
    /// (and cross-sub) level. Level batches group concepts that share a
    /// candidate set.
    pub fn annotate_seeds(&self, concepts: &[Concept], taxonomy: &Taxonomy) -> Vec<SeedAnnotation> {
        let pillars = self.classify_pillar(concepts, taxonomy);
        let mut annotations: Vec<SeedAnnotation> = concepts
            .iter()
            .zip(&pillars)
            .map(|(concept, &pillar)| SeedAnnotation {
                concept: concept.clone(),
                pillar,
                relations: Vec::new(),
            })
            .collect();

        // (concept indices, candidate set) level batches
        let run_level = |gateway: &Gateway<A>,
                         annotations: &mut Vec<SeedAnnotation>,
                         members: &[usize],
                         candidates: &[&Topic]| {
            if members.is_empty() || candidates.is_empty() {
                return Vec::new();
            }
            let phrases: Vec<Concept> = members.iter().map(|&i| concepts[i].clone()).collect();
            let results = gateway.classify_relation_topic(&phrases, candidates);
            let mut chosen: Vec<(usize, String)> = Vec::new();
            for (&i, result) in members.iter().zip(results) {
                if let Some((relation, topic)) = result {
                    annotations[i].relations.push((relation, topic.clone()));
                    chosen.push((i, topic));
                }
            }
            chosen
        };

        for pillar in [Pillar::Environmental, Pillar::Social, Pillar::Governance] {
            let members: Vec<usize> = (0..concepts.len())
                .filter(|&i| pillars[i].as_pillar() == Some(pillar))
                .collect();
            if members.is_empty() {
                continue;
            }

            let broad = taxonomy.broad_topics_for(pillar);
            let chosen_broad = run_level(self, &mut annotations, &members, &broad);

            let chosen_cross = if pillar == Pillar::Environmental {
                let cross = taxonomy.cross_broad_topics();
                run_level(self, &mut annotations, &members, &cross)
            } else {
                Vec::new()
            };

            // sub levels, grouped by the parent actually chosen
            for chosen in [chosen_broad, chosen_cross] {
                let mut by_parent: BTreeMap<String, Vec<usize>> = BTreeMap::new();
                for (i, parent) in chosen {
                    by_parent.entry(parent).or_default().push(i);
                }
                for (parent, group) in by_parent {
                    let children = taxonomy.children_of(&parent);
                    run_level(self, &mut annotations, &group, &children);
                }
            }
        }
        annotations
    }

    /// Single-concept convenience over `annotate_seeds`.
    pub fn annotate_seed(&self, concept: &Concept, taxonomy: &Taxonomy) -> SeedAnnotation {
        self.annotate_seeds(std::slice::from_ref(concept), taxonomy)
            .pop()
            .expect("one annotation per concept")
    }
}
