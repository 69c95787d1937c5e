//! HTTP backend speaking the generic JSON chat-completion shape. The
//! prompt text rides in a single user message followed by the phrase list;
//! answers come back in the prompt-mandated echo format and are matched to
//! inputs by the echoed line.

use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::{AnnotateError, Annotator, Task};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct RemoteConfig {
    pub base_url: String,
    pub model: String,
    /// name of the environment variable holding the API key; the key
    /// itself never appears in config files
    pub api_key_env: String,
    pub timeout_secs: u64,
    pub max_retries: u32,
}

impl Default for RemoteConfig {
    fn default() -> RemoteConfig {
        RemoteConfig {
            base_url: "https://api.openai.com/v1".to_string(),
            model: "gpt-4o".to_string(),
            api_key_env: "ESGLEX_API_KEY".to_string(),
            timeout_secs: 60,
            max_retries: 3,
        }
    }
}

pub struct RemoteAnnotator {
    config: RemoteConfig,
    agent: ureq::Agent,
}

impl RemoteAnnotator {
    pub fn new(config: RemoteConfig) -> RemoteAnnotator {
        let agent = ureq::AgentBuilder::new()
            .timeout(Duration::from_secs(config.timeout_secs))
            .build();
        RemoteAnnotator { config, agent }
    }

    fn request_body(&self, task: &Task, inputs: &[String]) -> serde_json::Value {
        let phrases = inputs.join("\n");
        let content = format!("{}\n\nPhrases:\n{phrases}\n\n```\n```", task.prompt);
        serde_json::json!({
            "model": self.config.model,
            "temperature": 0,
            "messages": [{ "role": "user", "content": content }],
        })
    }
}

impl Annotator for RemoteAnnotator {
    fn complete(
        &self,
        task: &Task,
        inputs: &[String],
    ) -> Result<Vec<Option<String>>, AnnotateError> {
        let key = std::env::var(&self.config.api_key_env)
            .map_err(|_| AnnotateError::MissingApiKey(self.config.api_key_env.clone()))?;
        let url = format!(
            "{}/chat/completions",
            self.config.base_url.trim_end_matches('/')
        );
        let body = self.request_body(task, inputs);

        let mut last_err = AnnotateError::Transport("no attempt made".into());
        for attempt in 0..=self.config.max_retries {
            if attempt > 0 {
                std::thread::sleep(Duration::from_secs(attempt as u64));
            }
            let sent = self
                .agent
                .post(&url)
                .set("Authorization", &format!("Bearer {key}"))
                .send_json(body.clone());
            match sent {
                Ok(response) => {
                    let payload: serde_json::Value = response
                        .into_json()
                        .map_err(|e| AnnotateError::BadPayload(e.to_string()))?;
                    let content = payload["choices"][0]["message"]["content"]
                        .as_str()
                        .ok_or_else(|| {
                            AnnotateError::BadPayload("no message content in completion".into())
                        })?;
                    return Ok(parse_echo_format(content, inputs));
                }
                Err(ureq::Error::Status(status, response)) => {
                    let text = response.into_string().unwrap_or_default();
                    // rate limits and server faults are retried, the rest
                    // fail fast
                    if status == 429 || status >= 500 {
                        last_err = AnnotateError::Http { status, body: text };
                        continue;
                    }
                    return Err(AnnotateError::Http { status, body: text });
                }
                Err(ureq::Error::Transport(t)) => {
                    last_err = AnnotateError::Transport(t.to_string());
                }
            }
        }
        Err(last_err)
    }
}

/// Picks per-input answers out of an `Input:` / `Output:` (or `Response:`)
/// echo transcript. Items the transcript never echoes come back as `None`.
pub(crate) fn parse_echo_format(content: &str, inputs: &[String]) -> Vec<Option<String>> {
    let mut answers: std::collections::HashMap<String, String> = std::collections::HashMap::new();
    let mut current_input: Option<String> = None;
    for raw in content.lines() {
        let line = raw.trim().trim_start_matches("```").trim();
        if line.is_empty() {
            continue;
        }
        let lower = line.to_lowercase();
        if let Some(rest) = lower
            .starts_with("input:")
            .then(|| line[6..].trim().to_lowercase())
        {
            current_input = Some(rest);
        } else if let Some(idx) = ["output:", "response:"]
            .iter()
            .find_map(|p| lower.starts_with(p).then(|| p.len()))
        {
            if let Some(input) = current_input.take() {
                answers.insert(input, line[idx..].trim().to_string());
            }
        }
    }
    inputs
        .iter()
        .map(|input| answers.get(&input.trim().to_lowercase()).cloned())
        .collect()
}
