//! Completion sources: built-in oracles and a remote HTTP endpoint.

use std::str::FromStr;
use std::thread;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use thiserror::Error;
use tracing::warn;

use crate::cf_gen::CounterfactualPair;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Side {
    Original,
    Mutated,
}

impl Side {
    pub const BOTH: [Side; 2] = [Side::Original, Side::Mutated];

    pub fn as_str(&self) -> &'static str {
        match self {
            Side::Original => "original",
            Side::Mutated => "mutated",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EndpointKind {
    Remote,
    OraclePerfect,
    OracleMemorizer,
    OracleEmpty,
}

impl EndpointKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            EndpointKind::Remote => "remote",
            EndpointKind::OraclePerfect => "oracle-perfect",
            EndpointKind::OracleMemorizer => "oracle-memorizer",
            EndpointKind::OracleEmpty => "oracle-empty",
        }
    }
}

impl FromStr for EndpointKind {
    type Err = EndpointError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "remote" => Ok(EndpointKind::Remote),
            "oracle-perfect" => Ok(EndpointKind::OraclePerfect),
            "oracle-memorizer" => Ok(EndpointKind::OracleMemorizer),
            "oracle-empty" => Ok(EndpointKind::OracleEmpty),
            other => Err(EndpointError::Config(format!("unknown endpoint kind `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelEndpoint {
    pub name: String,
    pub kind: EndpointKind,
    /// Full URL that accepts the completion POST (remote only).
    pub url: Option<String>,
    /// Name of the environment variable holding the bearer token.
    pub token_env: Option<String>,
    /// Model identifier sent with each request, when the server wants one.
    pub model: Option<String>,
    pub temperature: f64,
    pub max_tokens: u32,
    pub max_retries: u32,
    pub timeout_s: f64,
}

impl Default for ModelEndpoint {
    fn default() -> Self {
        ModelEndpoint {
            name: "oracle-perfect".into(),
            kind: EndpointKind::OraclePerfect,
            url: None,
            token_env: None,
            model: None,
            temperature: 0.0,
            max_tokens: 512,
            max_retries: 5,
            timeout_s: 120.0,
        }
    }
}

#[derive(Debug, Error)]
pub enum EndpointError {
    #[error("endpoint misconfigured: {0}")]
    Config(String),
    #[error("request failed after {attempts} attempts: {last}")]
    Exhausted { attempts: u32, last: String },
    #[error("response has no completion text: {0}")]
    Schema(String),
}

/// Text produced for one prompt, with its latency (0 for oracles so that
/// oracle runs are byte-reproducible).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Completion {
    pub text: String,
    pub latency_ms: u64,
}

impl ModelEndpoint {
    pub fn oracle(kind: EndpointKind) -> Self {
        ModelEndpoint {
            name: kind.as_str().into(),
            kind,
            ..ModelEndpoint::default()
        }
    }

    /// Complete the given side of a pair. The prompt is the side's prefix;
    /// natural-language instructions already live inside it as docstrings.
    pub fn complete(&self, client: Option<&reqwest::blocking::Client>, pair: &CounterfactualPair, side: Side) -> Result<Completion, EndpointError> {
        let oracle = |text: &str| {
            Ok(Completion {
                text: text.to_string(),
                latency_ms: 0,
            })
        };
        match (self.kind, side) {
            (EndpointKind::OracleEmpty, _) => oracle(""),
            (EndpointKind::OraclePerfect, Side::Mutated) => oracle(&pair.suffix_mutated),
            (EndpointKind::OraclePerfect | EndpointKind::OracleMemorizer, _) => oracle(&pair.suffix_original),
            (EndpointKind::Remote, _) => {
                let prompt = match side {
                    Side::Original => &pair.prefix_original,
                    Side::Mutated => &pair.prefix_mutated,
                };
                let owned;
                let client = match client {
                    Some(c) => c,
                    None => {
                        owned = self.client()?;
                        &owned
                    }
                };
                self.remote(client, prompt)
            }
        }
    }

    pub fn client(&self) -> Result<reqwest::blocking::Client, EndpointError> {
        reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs_f64(self.timeout_s.max(1.0)))
            .build()
            .map_err(|e| EndpointError::Config(e.to_string()))
    }

    fn remote(&self, client: &reqwest::blocking::Client, prompt: &str) -> Result<Completion, EndpointError> {
        let url = self.url.as_deref().ok_or_else(|| EndpointError::Config("remote endpoint needs a url".into()))?;
        let token = match &self.token_env {
            Some(var) => Some(std::env::var(var).map_err(|_| EndpointError::Config(format!("environment variable {var} is not set")))?),
            None => None,
        };
        let mut body = serde_json::json!({
            "prompt": prompt,
            "temperature": self.temperature,
            "max_tokens": self.max_tokens,
        });
        if let Some(m) = &self.model {
            body["model"] = m.clone().into();
        }
        let mut last = String::new();
        let attempts = self.max_retries + 1;
        for attempt in 0..attempts {
            if attempt > 0 {
                let wait = Duration::from_millis(250u64 << (attempt - 1).min(6));
                warn!(attempt, ?wait, error = %last, "retrying completion request");
                thread::sleep(wait);
            }
            let started = Instant::now();
            let mut req = client.post(url).json(&body);
            if let Some(t) = &token {
                req = req.bearer_auth(t);
            }
            let resp = match req.send() {
                Ok(r) => r,
                Err(e) => {
                    last = e.to_string();
                    continue;
                }
            };
            let status = resp.status();
            if status.as_u16() == 429 || status.is_server_error() {
                last = format!("HTTP {status}");
                continue;
            }
            if !status.is_success() {
                return Err(EndpointError::Exhausted {
                    attempts: attempt + 1,
                    last: format!("HTTP {status}"),
                });
            }
            let json: serde_json::Value = match resp.json() {
                Ok(v) => v,
                Err(e) => {
                    last = e.to_string();
                    continue;
                }
            };
            let text = extract_text(&json).ok_or_else(|| EndpointError::Schema(truncate(&json.to_string(), 200)))?;
            return Ok(Completion {
                text,
                latency_ms: started.elapsed().as_millis() as u64,
            });
        }
        Err(EndpointError::Exhausted { attempts, last })
    }
}

/// Completion text from the common provider response shapes.
pub fn extract_text(v: &serde_json::Value) -> Option<String> {
    let choice = v.get("choices").and_then(|c| c.get(0));
    [
        choice.and_then(|c| c.get("text")),
        choice.and_then(|c| c.get("message")).and_then(|m| m.get("content")),
        v.get("text"),
        v.get("completion"),
        v.get("generated_text"),
        v.get(0).and_then(|c| c.get("generated_text")),
    ]
    .into_iter()
    .flatten()
    .find_map(|t| t.as_str().map(str::to_string))
}

fn truncate(s: &str, n: usize) -> String {
    s.chars().take(n).collect()
}
