//! Completion backends: an OpenAI-compatible HTTP client plus two offline
//! backends (recorded completions keyed by prompt hash, and gold-derived
//! completions keyed by instance id).

use std::collections::HashMap;
use std::io::{BufRead, Write};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Duration;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::codec::{completion_suffix, SourceText};
use crate::prompt::Prompt;

/// Environment variable holding the bearer token for remote endpoints.
pub const API_KEY_ENV: &str = "GRAPHCODE_API_KEY";

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ClientError {
    #[error("endpoint answered HTTP {0}")]
    HttpError(u16),
    #[error("request timed out")]
    Timeout,
    #[error("transport failure: {0}")]
    Transport(String),
    #[error("malformed response: {0}")]
    BadResponse(String),
    #[error("no recorded completion for {0}")]
    MissingOracleEntry(String),
    #[error("prompt is {bytes} bytes; the limit is {limit}")]
    PromptTooLarge { bytes: usize, limit: usize },
    #[error("remote backend is not compiled in")]
    RemoteUnavailable,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CompletionConfig {
    pub endpoint_url: String,
    pub model_name: String,
    pub max_tokens: u32,
    pub temperature: f64,
    pub stop_sequences: Vec<String>,
    pub timeout_seconds: u64,
    pub max_retries: u32,
    pub parallelism: usize,
    pub max_prompt_bytes: usize,
    /// Seeds the retry jitter so backoff schedules are reproducible.
    pub jitter_seed: u64,
}

impl Default for CompletionConfig {
    fn default() -> Self {
        CompletionConfig {
            endpoint_url: "http://127.0.0.1:8000/v1/completions".into(),
            model_name: "code-davinci-002".into(),
            max_tokens: 500,
            temperature: 0.0,
            stop_sequences: vec!["\nclass ".into(), "\n\n\n".into()],
            timeout_seconds: 60,
            max_retries: 5,
            parallelism: 4,
            max_prompt_bytes: 64 * 1024,
            jitter_seed: 0,
        }
    }
}

/// Cuts `text` before the earliest occurrence of any stop sequence.
pub fn strip_at_stop<'a>(text: &'a str, stops: &[String]) -> &'a str {
    let cut = stops
        .iter()
        .filter(|s| !s.is_empty())
        .filter_map(|s| text.find(s.as_str()))
        .min()
        .unwrap_or(text.len());
    &text[..cut]
}

/// Lowercase hex SHA-256 of the rendered prompt; the key for recorded
/// completions.
pub fn prompt_hash(rendered: &str) -> String {
    Sha256::digest(rendered.as_bytes())
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

/// Delay before retry number `n` (1-based): `2^(n-1)` seconds plus a jitter
/// in `[0, 1)`.
pub fn retry_delay(n: u32, jitter: f64) -> Duration {
    Duration::from_secs_f64(2f64.powi(n as i32 - 1) + jitter.clamp(0.0, 0.999_999))
}

pub trait Sleeper: Send + Sync {
    fn sleep(&self, d: Duration);
}

#[derive(Debug, Default)]
pub struct ThreadSleeper;

impl Sleeper for ThreadSleeper {
    fn sleep(&self, d: Duration) {
        std::thread::sleep(d);
    }
}

/// One HTTP attempt. Status errors carry the code so the retry loop can
/// decide whether to try again.
pub trait Transport: Send + Sync {
    fn post(
        &self,
        url: &str,
        body: &serde_json::Value,
        timeout: Duration,
    ) -> Result<serde_json::Value, ClientError>;
}

#[cfg(feature = "remote")]
#[derive(Debug, Default)]
pub struct UreqTransport;

#[cfg(feature = "remote")]
impl Transport for UreqTransport {
    fn post(
        &self,
        url: &str,
        body: &serde_json::Value,
        timeout: Duration,
    ) -> Result<serde_json::Value, ClientError> {
        let agent = ureq::AgentBuilder::new().timeout(timeout).build();
        let mut req = agent.post(url).set("Content-Type", "application/json");
        if let Ok(key) = std::env::var(API_KEY_ENV) {
            req = req.set("Authorization", &format!("Bearer {key}"));
        }
        match req.send_json(body) {
            Ok(resp) => resp
                .into_json()
                .map_err(|e| ClientError::BadResponse(e.to_string())),
            Err(ureq::Error::Status(code, _)) => Err(ClientError::HttpError(code)),
            Err(ureq::Error::Transport(t)) => {
                let msg = t.to_string();
                if msg.contains("timed out") || msg.contains("Timeout") {
                    Err(ClientError::Timeout)
                } else {
                    Err(ClientError::Transport(msg))
                }
            }
        }
    }
}

pub struct RemoteClient {
    pub config: CompletionConfig,
    transport: Box<dyn Transport>,
    sleeper: Box<dyn Sleeper>,
    jitter: Mutex<ChaCha8Rng>,
}

impl std::fmt::Debug for RemoteClient {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("RemoteClient")
            .field("config", &self.config)
            .finish_non_exhaustive()
    }
}

impl RemoteClient {
    #[cfg(feature = "remote")]
    pub fn new(config: CompletionConfig) -> Self {
        Self::with_parts(config, Box::new(UreqTransport), Box::new(ThreadSleeper))
    }

    pub fn with_parts(
        config: CompletionConfig,
        transport: Box<dyn Transport>,
        sleeper: Box<dyn Sleeper>,
    ) -> Self {
        let jitter = Mutex::new(ChaCha8Rng::seed_from_u64(config.jitter_seed));
        RemoteClient {
            config,
            transport,
            sleeper,
            jitter,
        }
    }

    pub fn request_body(&self, prompt: &str) -> serde_json::Value {
        serde_json::json!({
            "model": self.config.model_name,
            "prompt": prompt,
            "max_tokens": self.config.max_tokens,
            "temperature": self.config.temperature,
            "stop": self.config.stop_sequences,
        })
    }

    pub fn complete(&self, prompt: &str) -> Result<String, ClientError> {
        if prompt.len() > self.config.max_prompt_bytes {
            return Err(ClientError::PromptTooLarge {
                bytes: prompt.len(),
                limit: self.config.max_prompt_bytes,
            });
        }
        let body = self.request_body(prompt);
        let timeout = Duration::from_secs(self.config.timeout_seconds);
        let mut attempt = 0;
        loop {
            let result = self
                .transport
                .post(&self.config.endpoint_url, &body, timeout);
            let retryable = match &result {
                Ok(_) => false,
                Err(ClientError::HttpError(code)) => *code == 429 || (500..600).contains(code),
                Err(ClientError::Timeout | ClientError::Transport(_)) => true,
                Err(_) => false,
            };
            if !retryable || attempt >= self.config.max_retries {
                let json = result?;
                let text = json
                    .pointer("/choices/0/text")
                    .and_then(|t| t.as_str())
                    .ok_or_else(|| ClientError::BadResponse("missing choices[0].text".into()))?;
                return Ok(strip_at_stop(text, &self.config.stop_sequences).to_string());
            }
            attempt += 1;
            let jitter = self
                .jitter
                .lock()
                .map(|mut r| r.gen::<f64>())
                .unwrap_or(0.0);
            self.sleeper.sleep(retry_delay(attempt, jitter));
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CannedEntry {
    pub prompt_sha256: String,
    pub completion: String,
}

#[derive(Debug)]
pub enum Backend {
    Remote(Box<RemoteClient>),
    /// Recorded completions keyed by [`prompt_hash`].
    Canned(HashMap<String, String>),
    /// Gold encodings keyed by instance id; answers with the part after the
    /// prompt's stub.
    Oracle(HashMap<String, SourceText>),
}

impl Backend {
    pub fn complete(&self, prompt: &Prompt, instance_id: &str) -> Result<String, ClientError> {
        let stops = self.stop_sequences();
        match self {
            Backend::Remote(client) => client.complete(&prompt.rendered),
            Backend::Canned(map) => {
                let key = prompt_hash(&prompt.rendered);
                let text = map.get(&key).ok_or(ClientError::MissingOracleEntry(key))?;
                Ok(strip_at_stop(text, &stops).to_string())
            }
            Backend::Oracle(map) => {
                let gold = map
                    .get(instance_id)
                    .ok_or_else(|| ClientError::MissingOracleEntry(instance_id.to_string()))?;
                Ok(
                    strip_at_stop(completion_suffix(&prompt.stub.text, &gold.text), &stops)
                        .to_string(),
                )
            }
        }
    }

    fn stop_sequences(&self) -> Vec<String> {
        match self {
            Backend::Remote(c) => c.config.stop_sequences.clone(),
            _ => CompletionConfig::default().stop_sequences,
        }
    }

    pub fn parallelism(&self) -> usize {
        match self {
            Backend::Remote(c) => c.config.parallelism.max(1),
            _ => 1,
        }
    }

    /// Reads a JSON-lines file of [`CannedEntry`] records.
    pub fn read_canned(r: impl BufRead) -> Result<HashMap<String, String>, String> {
        let mut map = HashMap::new();
        for (i, line) in r.lines().enumerate() {
            let line = line.map_err(|e| e.to_string())?;
            if line.trim().is_empty() {
                continue;
            }
            let entry: CannedEntry =
                serde_json::from_str(&line).map_err(|e| format!("line {}: {e}", i + 1))?;
            map.insert(entry.prompt_sha256, entry.completion);
        }
        Ok(map)
    }

    pub fn write_canned<'a>(
        mut w: impl Write,
        entries: impl IntoIterator<Item = &'a CannedEntry>,
    ) -> std::io::Result<()> {
        for e in entries {
            serde_json::to_writer(&mut w, e)?;
            writeln!(w)?;
        }
        Ok(())
    }
}

/// Runs every job with at most `parallelism` in flight. Results come back
/// in input order; a failed job is a value, not a batch failure.
pub fn batch_complete(
    backend: &Backend,
    jobs: &[(String, Prompt)],
    parallelism: usize,
) -> Vec<(String, Result<String, ClientError>)> {
    let slots: Vec<Mutex<Option<Result<String, ClientError>>>> =
        jobs.iter().map(|_| Mutex::new(None)).collect();
    let next = AtomicUsize::new(0);
    let workers = parallelism.max(1).min(jobs.len());
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                let Some((id, prompt)) = jobs.get(i) else {
                    break;
                };
                let result = backend.complete(prompt, id);
                *slots[i].lock().expect("slot lock") = Some(result);
            });
        }
    });
    jobs.iter()
        .zip(slots)
        .map(|((id, _), slot)| {
            let result = slot
                .into_inner()
                .expect("slot lock")
                .expect("every job ran");
            (id.clone(), result)
        })
        .collect()
}
