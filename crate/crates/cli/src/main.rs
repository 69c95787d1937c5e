//! Command-line frontend. Each subcommand is one pipeline stage working
//! from files, plus `pipeline` which chains them all.

mod config;
mod stages;

use std::path::PathBuf;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};

use esglex_core::matcher::MatchMode;

use config::{BackendKind, Config};

#[derive(Parser)]
#[command(
    name = "esglex",
    version,
    about = "ESG lexicon construction and topic analysis"
)]
struct Cli {
    /// TOML config file; flags below override its keys
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Taxonomy TSV; defaults to the built-in taxonomy
    #[arg(long, global = true, value_name = "PATH")]
    taxonomy: Option<PathBuf>,

    /// Annotation cache file (JSON Lines, append-only)
    #[arg(long, global = true, value_name = "PATH")]
    cache: Option<PathBuf>,

    #[arg(long, global = true, value_enum)]
    backend: Option<BackendKind>,

    /// Cosine similarity above which concepts are connected (strict)
    #[arg(long, global = true)]
    similarity_threshold: Option<f64>,

    /// Confidence bar for the clustering quality indicator
    #[arg(long, global = true)]
    cqi_tau: Option<f64>,

    /// Step size for the seed proportion search
    #[arg(long, global = true)]
    beta: Option<f64>,

    /// Maximum label propagation passes
    #[arg(long, global = true)]
    n_layers: Option<usize>,

    /// Propagation damping: weight on the neighbourhood term
    #[arg(long, global = true)]
    alpha: Option<f64>,

    /// Concepts kept after frequency ranking
    #[arg(long, global = true)]
    top_k: Option<usize>,

    /// Minimum propagated score for a label to stick
    #[arg(long, global = true)]
    tau_assign: Option<f64>,

    /// Seed count for selection; 0 picks 15% of the nodes
    #[arg(long, global = true)]
    seed_target: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

impl Cli {
    fn resolve_config(&self) -> anyhow::Result<Config> {
        let mut cfg = match &self.config {
            Some(path) => Config::load(path)?,
            None => Config::default(),
        };
        macro_rules! apply {
            ($($field:ident),*) => {
                $(if let Some(v) = self.$field { cfg.$field = v; })*
            };
        }
        apply!(
            backend,
            similarity_threshold,
            cqi_tau,
            beta,
            n_layers,
            alpha,
            top_k,
            tau_assign,
            seed_target
        );
        Ok(cfg)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Extract candidate concepts from CoNLL-U files, ranked by frequency
    Parse {
        /// CoNLL-U input file(s)
        #[arg(long, required = true, num_args = 1..)]
        input: Vec<PathBuf>,
        #[arg(long)]
        output: PathBuf,
    },
    /// Keep the top-k most frequent concepts
    Filter {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
    },
    /// Quality control: reorder scrambled phrases, drop incoherent ones
    Qc {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
        /// Where to list dropped phrases with reasons
        #[arg(long)]
        rejected: Option<PathBuf>,
    },
    /// Build the semantic similarity graph from embeddings
    Graph {
        /// Embeddings as JSON Lines {"concept", "vector"}
        #[arg(long)]
        embeddings: PathBuf,
        /// Restrict to the concepts in this ranked file, in its order
        #[arg(long)]
        concepts: Option<PathBuf>,
        #[arg(long)]
        edges: PathBuf,
        #[arg(long)]
        nodes: PathBuf,
    },
    /// Cluster graph nodes (connected components of the similarity graph)
    Cluster {
        #[arg(long)]
        embeddings: PathBuf,
        #[arg(long)]
        nodes: PathBuf,
        #[arg(long)]
        output: PathBuf,
    },
    /// Clustering quality indicator: share of nodes above the confidence bar
    Cqi {
        #[arg(long)]
        clusters: PathBuf,
        #[arg(long)]
        nodes: PathBuf,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Select seed nodes per cluster by consequence score
    Seeds {
        #[arg(long)]
        edges: PathBuf,
        #[arg(long)]
        nodes: PathBuf,
        #[arg(long)]
        clusters: PathBuf,
        #[arg(long)]
        output: PathBuf,
    },
    /// Annotate seed concepts with pillar and relation-topic labels
    Annotate {
        #[arg(long)]
        seeds: PathBuf,
        #[arg(long)]
        output: PathBuf,
    },
    /// Propagate seed labels over the graph
    Propagate {
        #[arg(long)]
        edges: PathBuf,
        #[arg(long)]
        nodes: PathBuf,
        #[arg(long)]
        labels: PathBuf,
        #[arg(long)]
        output: PathBuf,
    },
    /// Combine seed labels and propagated triples into the knowledge base
    BuildKb {
        #[arg(long)]
        seed_labels: PathBuf,
        #[arg(long)]
        propagated: Option<PathBuf>,
        #[arg(long)]
        output: PathBuf,
    },
    /// Check the KB against the validation rules; violations fail the run
    Validate {
        #[arg(long)]
        kb: PathBuf,
    },
    /// Per-topic triple counts and totals
    Stats {
        #[arg(long)]
        kb: PathBuf,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Find KB concepts in report text
    Match {
        #[arg(long)]
        kb: PathBuf,
        /// Plain-text or .jsonl report file(s)
        #[arg(long, required = true, num_args = 1..)]
        corpus: Vec<PathBuf>,
        #[arg(long, value_parser = parse_mode, default_value = "flexible")]
        mode: MatchMode,
        #[arg(long)]
        output: PathBuf,
    },
    /// Topic-frequency report from a match table
    Analyze {
        #[arg(long)]
        kb: PathBuf,
        #[arg(long)]
        matches: PathBuf,
        /// JSON report path
        #[arg(long)]
        output: PathBuf,
        /// Also write the frequency table as CSV
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Judge lexicon terms and report quality metrics
    Eval {
        #[arg(long)]
        matches: Option<PathBuf>,
        /// Extra terms, one per line
        #[arg(long)]
        terms: Option<PathBuf>,
        /// Existing judgment file(s); two files also report agreement
        #[arg(long, num_args = 0..=2)]
        judgments: Vec<PathBuf>,
        /// Where to save judgments produced by the gateway judge
        #[arg(long)]
        save_judgments: Option<PathBuf>,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Run every stage in order, writing all artifacts into one directory
    Pipeline(PipelineArgs),
}

#[derive(Args)]
struct PipelineArgs {
    /// CoNLL-U input file(s)
    #[arg(long, required = true, num_args = 1..)]
    input: Vec<PathBuf>,
    #[arg(long)]
    embeddings: PathBuf,
    /// Report file(s) to match the finished lexicon against
    #[arg(long, required = true, num_args = 1..)]
    corpus: Vec<PathBuf>,
    #[arg(long)]
    outdir: PathBuf,
    #[arg(long, value_parser = parse_mode, default_value = "flexible")]
    mode: MatchMode,
}

fn parse_mode(s: &str) -> Result<MatchMode, String> {
    s.parse()
}

fn run_pipeline(cli: &Cli, cfg: &Config, args: &PipelineArgs) -> anyhow::Result<()> {
    std::fs::create_dir_all(&args.outdir)
        .with_context(|| format!("cannot create output directory {}", args.outdir.display()))?;
    let out = |name: &str| args.outdir.join(name);
    let taxonomy = stages::load_taxonomy(cli.taxonomy.as_deref())?;
    let cache_path = cli
        .cache
        .clone()
        .unwrap_or_else(|| out("annotation_cache.jsonl"));
    let gateway = stages::build_gateway(cfg, Some(&cache_path))?;

    stages::parse(&args.input, &out("concepts.tsv"))?;
    stages::filter(&out("concepts.tsv"), &out("filtered.tsv"), cfg.top_k)?;
    stages::qc(
        &gateway,
        &out("filtered.tsv"),
        &out("qc.tsv"),
        Some(&out("rejected.tsv")),
    )?;
    stages::graph(
        &args.embeddings,
        Some(&out("qc.tsv")),
        &out("edges.tsv"),
        &out("nodes.tsv"),
        cfg.similarity_threshold,
    )?;
    stages::cluster(
        &args.embeddings,
        &out("nodes.tsv"),
        &out("clusters.tsv"),
        cfg.similarity_threshold,
    )?;
    stages::cqi_stage(
        &out("clusters.tsv"),
        &out("nodes.tsv"),
        Some(&out("cqi.txt")),
        cfg.cqi_tau,
    )?;
    stages::seeds_stage(
        &out("edges.tsv"),
        &out("nodes.tsv"),
        &out("clusters.tsv"),
        &out("seeds.tsv"),
        cfg.seed_target,
        cfg.beta,
    )?;
    stages::annotate(
        &gateway,
        &taxonomy,
        &out("seeds.tsv"),
        &out("seed_labels.tsv"),
    )?;
    stages::propagate_stage(
        &taxonomy,
        &out("edges.tsv"),
        &out("nodes.tsv"),
        &out("seed_labels.tsv"),
        &out("propagated.tsv"),
        cfg.n_layers,
        cfg.alpha,
        cfg.tau_assign,
    )?;
    stages::build_kb(
        &taxonomy,
        &out("seed_labels.tsv"),
        Some(&out("propagated.tsv")),
        &out("kb.tsv"),
    )?;
    stages::validate(&taxonomy, &out("kb.tsv"))?;
    stages::stats(&taxonomy, &out("kb.tsv"), Some(&out("stats.tsv")))?;
    stages::match_stage(
        &taxonomy,
        &out("kb.tsv"),
        &args.corpus,
        args.mode,
        &out("matches.tsv"),
    )?;
    stages::analyze(
        &taxonomy,
        &out("kb.tsv"),
        &out("matches.tsv"),
        &out("report.json"),
        Some(&out("report.csv")),
        cfg.top_concepts,
    )?;
    stages::eval(
        &gateway,
        backend_name(cfg.backend),
        Some(&out("matches.tsv")),
        None,
        &[],
        Some(&out("judgments.tsv")),
        Some(&out("metrics.tsv")),
    )?;
    println!("pipeline: artifacts in {}", args.outdir.display());
    Ok(())
}

fn backend_name(kind: BackendKind) -> &'static str {
    match kind {
        BackendKind::Mock => "mock",
        BackendKind::Remote => "remote",
    }
}

fn main() -> anyhow::Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .init();
    let cli = Cli::parse();
    let cfg = cli.resolve_config()?;

    match &cli.command {
        Command::Parse { input, output } => stages::parse(input, output),
        Command::Filter { input, output } => stages::filter(input, output, cfg.top_k),
        Command::Qc {
            input,
            output,
            rejected,
        } => {
            let gateway = stages::build_gateway(&cfg, cli.cache.as_deref())?;
            stages::qc(&gateway, input, output, rejected.as_deref())
        }
        Command::Graph {
            embeddings,
            concepts,
            edges,
            nodes,
        } => stages::graph(
            embeddings,
            concepts.as_deref(),
            edges,
            nodes,
            cfg.similarity_threshold,
        ),
        Command::Cluster {
            embeddings,
            nodes,
            output,
        } => stages::cluster(embeddings, nodes, output, cfg.similarity_threshold),
        Command::Cqi {
            clusters,
            nodes,
            output,
        } => stages::cqi_stage(clusters, nodes, output.as_deref(), cfg.cqi_tau).map(|_| ()),
        Command::Seeds {
            edges,
            nodes,
            clusters,
            output,
        } => stages::seeds_stage(edges, nodes, clusters, output, cfg.seed_target, cfg.beta),
        Command::Annotate { seeds, output } => {
            let taxonomy = stages::load_taxonomy(cli.taxonomy.as_deref())?;
            let gateway = stages::build_gateway(&cfg, cli.cache.as_deref())?;
            stages::annotate(&gateway, &taxonomy, seeds, output)
        }
        Command::Propagate {
            edges,
            nodes,
            labels,
            output,
        } => {
            let taxonomy = stages::load_taxonomy(cli.taxonomy.as_deref())?;
            stages::propagate_stage(
                &taxonomy,
                edges,
                nodes,
                labels,
                output,
                cfg.n_layers,
                cfg.alpha,
                cfg.tau_assign,
            )
        }
        Command::BuildKb {
            seed_labels,
            propagated,
            output,
        } => {
            let taxonomy = stages::load_taxonomy(cli.taxonomy.as_deref())?;
            stages::build_kb(&taxonomy, seed_labels, propagated.as_deref(), output)
        }
        Command::Validate { kb } => {
            let taxonomy = stages::load_taxonomy(cli.taxonomy.as_deref())?;
            stages::validate(&taxonomy, kb)
        }
        Command::Stats { kb, output } => {
            let taxonomy = stages::load_taxonomy(cli.taxonomy.as_deref())?;
            stages::stats(&taxonomy, kb, output.as_deref())
        }
        Command::Match {
            kb,
            corpus,
            mode,
            output,
        } => {
            let taxonomy = stages::load_taxonomy(cli.taxonomy.as_deref())?;
            stages::match_stage(&taxonomy, kb, corpus, *mode, output)
        }
        Command::Analyze {
            kb,
            matches,
            output,
            csv,
        } => {
            let taxonomy = stages::load_taxonomy(cli.taxonomy.as_deref())?;
            stages::analyze(
                &taxonomy,
                kb,
                matches,
                output,
                csv.as_deref(),
                cfg.top_concepts,
            )
        }
        Command::Eval {
            matches,
            terms,
            judgments,
            save_judgments,
            output,
        } => {
            let gateway = stages::build_gateway(&cfg, cli.cache.as_deref())?;
            stages::eval(
                &gateway,
                backend_name(cfg.backend),
                matches.as_deref(),
                terms.as_deref(),
                judgments,
                save_judgments.as_deref(),
                output.as_deref(),
            )
        }
        Command::Pipeline(args) => run_pipeline(&cli, &cfg, args),
    }
}
