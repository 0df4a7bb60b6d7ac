use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::{Draw, Generator, GeneratorError, PromptBundle, Provenance, Response};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RemoteConfig {
    /// Full URL of the chat-completions route.
    pub endpoint: String,
    pub model: String,
    /// Name of the environment variable holding the API key.
    pub api_key_env: String,
    pub temperature: f64,
    pub timeout_s: u64,
    /// Extra attempts after a failed request.
    pub retries: usize,
}

impl Default for RemoteConfig {
    fn default() -> Self {
        RemoteConfig {
            endpoint: "https://api.openai.com/v1/chat/completions".into(),
            model: "gpt-4-1106-preview".into(),
            api_key_env: "LESR_API_KEY".into(),
            temperature: 1.0,
            timeout_s: 120,
            retries: 3,
        }
    }
}

/// Client for any chat-completions compatible endpoint.
pub struct RemoteGenerator {
    config: RemoteConfig,
    api_key: String,
    agent: ureq::Agent,
}

impl RemoteGenerator {
    /// Reads the API key from the configured variable; fails early if unset.
    pub fn new(config: RemoteConfig) -> Result<Self, GeneratorError> {
        let api_key = std::env::var(&config.api_key_env)
            .ok()
            .filter(|k| !k.is_empty())
            .ok_or_else(|| GeneratorError::MissingApiKey {
                var: config.api_key_env.clone(),
            })?;
        Ok(Self::with_key(config, api_key))
    }

    pub fn with_key(config: RemoteConfig, api_key: String) -> Self {
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs(config.timeout_s)))
            .build()
            .into();
        RemoteGenerator {
            config,
            api_key,
            agent,
        }
    }

    /// JSON body for one request.
    pub fn request_body(&self, prompt: &PromptBundle) -> Value {
        json!({
            "model": self.config.model,
            "temperature": self.config.temperature,
            "messages": [
                {"role": "system", "content": prompt.system},
                {"role": "user", "content": prompt.user},
            ],
        })
    }

    fn complete(&self, prompt: &PromptBundle) -> Result<String, GeneratorError> {
        let body = self.request_body(prompt);
        let attempts = self.config.retries + 1;
        let mut last = String::new();
        for attempt in 0..attempts {
            if attempt > 0 {
                std::thread::sleep(Duration::from_millis(250 << attempt.min(4)));
            }
            let result = self
                .agent
                .post(&self.config.endpoint)
                .header("Authorization", &format!("Bearer {}", self.api_key))
                .send_json(&body);
            match result {
                Ok(mut resp) => {
                    let value: Value = resp
                        .body_mut()
                        .read_json()
                        .map_err(|e| GeneratorError::BadResponse(e.to_string()))?;
                    return parse_content(&value);
                }
                Err(e) => {
                    log::warn!(
                        "request to {} failed (attempt {}): {e}",
                        self.config.endpoint,
                        attempt + 1
                    );
                    last = e.to_string();
                }
            }
        }
        Err(GeneratorError::Endpoint {
            attempts,
            message: last,
        })
    }
}

/// Extracts `choices[0].message.content`.
fn parse_content(value: &Value) -> Result<String, GeneratorError> {
    value
        .pointer("/choices/0/message/content")
        .and_then(Value::as_str)
        .map(str::to_string)
        .ok_or_else(|| GeneratorError::BadResponse("no choices[0].message.content".into()))
}

impl Generator for RemoteGenerator {
    fn generate(&mut self, prompt: &PromptBundle, _draw: Draw) -> Result<Response, GeneratorError> {
        Ok(Response {
            text: self.complete(prompt)?,
            provenance: Provenance::Model {
                model: self.config.model.clone(),
            },
        })
    }

    fn analyze(
        &mut self,
        prompt: &PromptBundle,
        _iteration: usize,
    ) -> Result<String, GeneratorError> {
        self.complete(prompt)
    }

    fn describe(&self) -> String {
        format!("remote ({} at {})", self.config.model, self.config.endpoint)
    }
}
