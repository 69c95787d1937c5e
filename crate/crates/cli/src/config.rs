//! Run configuration. Built-in defaults, overridden by a flat TOML file,
//! overridden again by command-line flags.

use std::path::Path;

use anyhow::Context;
use serde::Deserialize;

use esglex_core::analytics::DEFAULT_TOP_CONCEPTS;
use esglex_core::annotate::{DEFAULT_BATCH_SIZE, DEFAULT_CONCURRENCY};
use esglex_core::graph::DEFAULT_SIMILARITY_THRESHOLD;
use esglex_core::propagate::{DEFAULT_ALPHA, DEFAULT_N_LAYERS, DEFAULT_TAU_ASSIGN};
use esglex_core::seeds::{DEFAULT_BETA, DEFAULT_CQI_TAU};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum BackendKind {
    /// Deterministic fixture-driven annotator, no network.
    Mock,
    /// Chat-completions endpoint; the API key comes from the environment
    /// variable named by `api_key_env`.
    Remote,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub similarity_threshold: f64,
    pub cqi_tau: f64,
    pub beta: f64,
    pub n_layers: usize,
    pub alpha: f64,
    pub top_k: usize,
    pub tau_assign: f64,
    /// Seed count for selection; 0 picks 15% of the nodes.
    pub seed_target: usize,
    /// Rows per topic in the analysis report's top-concept lists.
    pub top_concepts: usize,
    pub backend: BackendKind,
    pub batch_size: usize,
    pub concurrency: usize,
    pub base_url: String,
    pub model: String,
    /// Name of the environment variable holding the API key. The key
    /// itself never appears in config files.
    pub api_key_env: String,
    pub timeout_secs: u64,
    pub max_retries: u32,
}

impl Default for Config {
    fn default() -> Config {
        let remote = esglex_core::annotate::RemoteConfig::default();
        Config {
            similarity_threshold: DEFAULT_SIMILARITY_THRESHOLD,
            cqi_tau: DEFAULT_CQI_TAU,
            beta: DEFAULT_BETA,
            n_layers: DEFAULT_N_LAYERS,
            alpha: DEFAULT_ALPHA,
            top_k: 110_000,
            tau_assign: DEFAULT_TAU_ASSIGN,
            seed_target: 0,
            top_concepts: DEFAULT_TOP_CONCEPTS,
            backend: BackendKind::Mock,
            batch_size: DEFAULT_BATCH_SIZE,
            concurrency: DEFAULT_CONCURRENCY,
            base_url: remote.base_url,
            model: remote.model,
            api_key_env: remote.api_key_env,
            timeout_secs: remote.timeout_secs,
            max_retries: remote.max_retries,
        }
    }
}

impl Config {
    pub fn load(path: &Path) -> anyhow::Result<Config> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("cannot read config file {}", path.display()))?;
        toml::from_str(&text).with_context(|| format!("invalid config file {}", path.display()))
    }

    pub fn remote_config(&self) -> esglex_core::annotate::RemoteConfig {
        esglex_core::annotate::RemoteConfig {
            base_url: self.base_url.clone(),
            model: self.model.clone(),
            api_key_env: self.api_key_env.clone(),
            timeout_secs: self.timeout_secs,
            max_retries: self.max_retries,
        }
    }
}
