//! Paraphrases coarse explanations into third-person narration through a
//! remote completion endpoint.
//!
//! Responses are cached on disk under the hex SHA-256 fingerprint of
//! (instruction, demonstrations, model, coarse text), so a warm cache makes a
//! rerun free and deterministic. Offline mode skips the network entirely and
//! only strips the speaker tags.

use std::collections::HashMap;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::builder::{CoTExample, ExplanationKind};
use crate::corpus::io::{parse_json, read_to_string};
use crate::{Error, Result};

const DEFAULT_CONFIG: &str = include_str!("../resources/refine_config.json");

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Demonstration {
    pub coarse: String,
    pub refined: String,
}

mod duration_ms {
    use serde::{Deserialize, Deserializer, Serializer};
    use std::time::Duration;

    pub fn serialize<S: Serializer>(d: &Duration, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_u64(d.as_millis() as u64)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Duration, D::Error> {
        u64::deserialize(d).map(Duration::from_millis)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RefineConfig {
    #[serde(default = "defaults::endpoint_url")]
    pub endpoint_url: String,
    #[serde(default = "defaults::model_name")]
    pub model_name: String,
    #[serde(default = "defaults::api_key_env_var")]
    pub api_key_env_var: String,
    #[serde(default = "defaults::instruction")]
    pub instruction: String,
    #[serde(default = "defaults::demonstrations")]
    pub demonstrations: Vec<Demonstration>,
    #[serde(default = "defaults::temperature")]
    pub temperature: f64,
    #[serde(default = "defaults::max_tokens")]
    pub max_tokens: u32,
    /// Retries after the first attempt.
    #[serde(default = "defaults::max_retries")]
    pub max_retries: u32,
    #[serde(rename = "backoff_base_ms", with = "duration_ms", default = "defaults::backoff_base")]
    pub backoff_base: Duration,
    #[serde(rename = "timeout_ms", with = "duration_ms", default = "defaults::timeout")]
    pub timeout: Duration,
    #[serde(default = "defaults::max_parallel")]
    pub max_parallel: usize,
    #[serde(default = "defaults::cache_dir")]
    pub cache_dir: PathBuf,
    #[serde(default = "defaults::offline")]
    pub offline: bool,
}

/// Field defaults come from the bundled config file, which sets every field.
mod defaults {
    use super::{Demonstration, RefineConfig, DEFAULT_CONFIG};
    use std::path::PathBuf;
    use std::sync::OnceLock;
    use std::time::Duration;

    pub(super) fn bundled() -> &'static RefineConfig {
        static BUNDLED: OnceLock<RefineConfig> = OnceLock::new();
        BUNDLED.get_or_init(|| serde_json::from_str(DEFAULT_CONFIG).expect("bundled refine config is valid"))
    }

    macro_rules! field {
        ($($name:ident: $ty:ty),* $(,)?) => {
            $(pub(super) fn $name() -> $ty { bundled().$name.clone() })*
        };
    }

    field!(
        endpoint_url: String,
        model_name: String,
        api_key_env_var: String,
        instruction: String,
        demonstrations: Vec<Demonstration>,
        temperature: f64,
        max_tokens: u32,
        max_retries: u32,
        backoff_base: Duration,
        timeout: Duration,
        max_parallel: usize,
        cache_dir: PathBuf,
        offline: bool,
    );
}

impl Default for RefineConfig {
    fn default() -> Self {
        defaults::bundled().clone()
    }
}

impl RefineConfig {
    /// Fields absent from the file keep their bundled defaults.
    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let config: Self = parse_json(&read_to_string(path)?, &path.display().to_string())?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.offline && self.demonstrations.is_empty() {
            return Err(Error::Validation("at least one demonstration is required".into()));
        }
        if self.temperature.is_nan() || self.temperature < 0.0 {
            return Err(Error::Validation(format!(
                "temperature must be >= 0, got {}",
                self.temperature
            )));
        }
        if self.max_parallel == 0 {
            return Err(Error::Validation("max_parallel must be at least 1".into()));
        }
        Ok(())
    }

    /// Completion prompt: instruction, then the demonstrations, then the
    /// input left open for the model to continue.
    pub fn render_prompt(&self, coarse: &str) -> String {
        let mut prompt = format!("{}\n\n", self.instruction.trim());
        for demo in &self.demonstrations {
            prompt.push_str(&format!("Input: {}\nOutput: {}\n\n", demo.coarse, demo.refined));
        }
        prompt.push_str(&format!("Input: {coarse}\nOutput:"));
        prompt
    }

    pub fn fingerprint(&self, coarse: &str) -> String {
        let mut hasher = Sha256::new();
        let mut field = |s: &str| {
            hasher.update((s.len() as u64).to_le_bytes());
            hasher.update(s.as_bytes());
        };
        field(&self.instruction);
        field(&self.demonstrations.len().to_string());
        for d in &self.demonstrations {
            field(&d.coarse);
            field(&d.refined);
        }
        field(&self.model_name);
        field(coarse);
        hex::encode(hasher.finalize())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RefineSource {
    Api,
    Cache,
    OfflinePassthrough,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RefineResult {
    pub coarse: String,
    pub refined: String,
    pub source: RefineSource,
    pub request_fingerprint: String,
}

/// Removes `system:` / `user:` tags and joins what is left with single spaces.
pub fn strip_speaker_tags(text: &str) -> String {
    text.split_whitespace()
        .filter(|tok| *tok != "system:" && *tok != "user:")
        .collect::<Vec<_>>()
        .join(" ")
}

#[derive(Serialize)]
struct CompletionRequest<'a> {
    model: &'a str,
    prompt: &'a str,
    temperature: f64,
    max_tokens: u32,
}

#[derive(Deserialize)]
struct CompletionResponse {
    choices: Vec<CompletionChoice>,
}

#[derive(Deserialize)]
struct CompletionChoice {
    #[serde(default)]
    text: Option<String>,
    #[serde(default)]
    message: Option<ChatMessage>,
}

#[derive(Deserialize)]
struct ChatMessage {
    content: String,
}

enum Attempt {
    Done(String),
    Retry(String),
    Fail(Error),
}

/// Per-example failure from [`Refiner::refine_batch`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RefineFailure {
    pub example_id: String,
    pub error: String,
}

#[derive(Debug, Clone)]
pub struct BatchOutcome {
    /// Same order and ids as the input; failed items are unchanged.
    pub examples: Vec<CoTExample>,
    pub failures: Vec<RefineFailure>,
}

impl BatchOutcome {
    pub fn is_complete(&self) -> bool {
        self.failures.is_empty()
    }
}

pub struct Refiner {
    config: RefineConfig,
    client: reqwest::blocking::Client,
    requests_sent: AtomicUsize,
}

impl Refiner {
    pub fn new(config: RefineConfig) -> Result<Self> {
        config.validate()?;
        let client = reqwest::blocking::Client::builder()
            .timeout(config.timeout)
            .build()
            .map_err(|e| Error::Network(e.to_string()))?;
        Ok(Self {
            config,
            client,
            requests_sent: AtomicUsize::new(0),
        })
    }

    pub fn config(&self) -> &RefineConfig {
        &self.config
    }

    /// HTTP requests issued so far, retries included.
    pub fn requests_sent(&self) -> usize {
        self.requests_sent.load(Ordering::SeqCst)
    }

    fn cache_path(&self, fingerprint: &str) -> PathBuf {
        self.config.cache_dir.join(fingerprint)
    }

    fn read_cache(&self, fingerprint: &str) -> Option<String> {
        let text = std::fs::read_to_string(self.cache_path(fingerprint)).ok()?;
        (!text.trim().is_empty()).then_some(text)
    }

    fn write_cache(&self, fingerprint: &str, refined: &str) -> Result<()> {
        let dir = &self.config.cache_dir;
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| Error::io(dir, e))?;
        tmp.write_all(refined.as_bytes())
            .map_err(|e| Error::io(tmp.path(), e))?;
        let target = self.cache_path(fingerprint);
        tmp.persist(&target).map_err(|e| Error::io(&target, e.error))?;
        Ok(())
    }

    pub fn refine_one(&self, coarse: &str) -> Result<RefineResult> {
        if coarse.trim().is_empty() {
            return Err(Error::Validation("coarse explanation is empty".into()));
        }
        let fingerprint = self.config.fingerprint(coarse);
        let result = |refined: String, source| RefineResult {
            coarse: coarse.to_string(),
            refined,
            source,
            request_fingerprint: fingerprint.clone(),
        };
        if self.config.offline {
            let refined = strip_speaker_tags(coarse);
            if refined.is_empty() {
                return Err(Error::EmptyCompletion);
            }
            return Ok(result(refined, RefineSource::OfflinePassthrough));
        }
        if let Some(cached) = self.read_cache(&fingerprint) {
            return Ok(result(cached, RefineSource::Cache));
        }
        let refined = self.complete(&self.config.render_prompt(coarse))?;
        self.write_cache(&fingerprint, &refined)?;
        Ok(result(refined, RefineSource::Api))
    }

    fn api_key(&self) -> Result<String> {
        std::env::var(&self.config.api_key_env_var)
            .ok()
            .filter(|k| !k.trim().is_empty())
            .ok_or_else(|| {
                Error::Auth(format!(
                    "environment variable {} is not set",
                    self.config.api_key_env_var
                ))
            })
    }

    fn complete(&self, prompt: &str) -> Result<String> {
        let key = self.api_key()?;
        let body = CompletionRequest {
            model: &self.config.model_name,
            prompt,
            temperature: self.config.temperature,
            max_tokens: self.config.max_tokens,
        };
        let mut last_error = String::new();
        for attempt in 0..=self.config.max_retries {
            if attempt > 0 {
                let factor = 1u32 << (attempt - 1).min(10);
                std::thread::sleep(self.config.backoff_base * factor);
            }
            match self.attempt(&key, &body) {
                Attempt::Done(text) => return Ok(text),
                Attempt::Fail(e) => return Err(e),
                Attempt::Retry(reason) => {
                    log::debug!("completion attempt {} failed: {reason}", attempt + 1);
                    last_error = reason;
                }
            }
        }
        Err(Error::Network(format!(
            "giving up after {} attempts: {last_error}",
            self.config.max_retries + 1
        )))
    }

    fn attempt(&self, key: &str, body: &CompletionRequest) -> Attempt {
        self.requests_sent.fetch_add(1, Ordering::SeqCst);
        let response = match self
            .client
            .post(&self.config.endpoint_url)
            .bearer_auth(key)
            .json(body)
            .send()
        {
            Ok(r) => r,
            Err(e) if e.is_timeout() || e.is_connect() || e.is_request() => return Attempt::Retry(e.to_string()),
            Err(e) => return Attempt::Fail(Error::Network(e.to_string())),
        };
        let status = response.status();
        if status == 401 || status == 403 {
            return Attempt::Fail(Error::Auth(format!("endpoint rejected the key ({status})")));
        }
        if status == 429 || status == 408 || status.is_server_error() {
            return Attempt::Retry(format!("status {status}"));
        }
        if !status.is_success() {
            return Attempt::Fail(Error::Network(format!("status {status}")));
        }
        let parsed: CompletionResponse = match response.json() {
            Ok(p) => p,
            Err(e) if e.is_timeout() => return Attempt::Retry(e.to_string()),
            Err(e) => return Attempt::Fail(Error::Network(format!("malformed completion: {e}"))),
        };
        let text = parsed
            .choices
            .into_iter()
            .next()
            .and_then(|c| c.text.or(c.message.map(|m| m.content)))
            .unwrap_or_default();
        let text = text.trim();
        if text.is_empty() {
            Attempt::Fail(Error::EmptyCompletion)
        } else {
            Attempt::Done(text.to_string())
        }
    }

    /// Refines every coarse example. See [`Refiner::refine_batch_where`].
    pub fn refine_batch(&self, examples: Vec<CoTExample>) -> BatchOutcome {
        self.refine_batch_where(examples, |_| true)
    }

    /// Refines the coarse examples accepted by `select`, with at most
    /// `max_parallel` requests in flight. Identical coarse texts are refined
    /// once. Other examples, and examples whose refinement failed, are
    /// returned unchanged.
    pub fn refine_batch_where<F>(&self, mut examples: Vec<CoTExample>, select: F) -> BatchOutcome
    where
        F: Fn(&CoTExample) -> bool,
    {
        let eligible: Vec<usize> = examples
            .iter()
            .enumerate()
            .filter(|(_, e)| {
                e.explanation_kind == ExplanationKind::Coarse && !e.explanation.trim().is_empty() && select(e)
            })
            .map(|(i, _)| i)
            .collect();

        let mut unique: Vec<&str> = Vec::new();
        let mut slot_of: HashMap<&str, usize> = HashMap::new();
        for &i in &eligible {
            let text = examples[i].explanation.as_str();
            slot_of.entry(text).or_insert_with(|| {
                unique.push(text);
                unique.len() - 1
            });
        }

        let results: Vec<Mutex<Option<Result<RefineResult>>>> = unique.iter().map(|_| Mutex::new(None)).collect();
        let next = AtomicUsize::new(0);
        let workers = self.config.max_parallel.min(unique.len());
        std::thread::scope(|scope| {
            for _ in 0..workers {
                scope.spawn(|| loop {
                    let i = next.fetch_add(1, Ordering::SeqCst);
                    if i >= unique.len() {
                        break;
                    }
                    let r = self.refine_one(unique[i]);
                    *results[i].lock().unwrap() = Some(r);
                });
            }
        });
        let results: Vec<Result<RefineResult>> = results
            .into_iter()
            .map(|m| m.into_inner().unwrap().expect("every text was processed"))
            .collect();
        let slots: Vec<usize> = eligible
            .iter()
            .map(|&i| slot_of[examples[i].explanation.as_str()])
            .collect();

        let mut failures = Vec::new();
        for (&i, slot) in eligible.iter().zip(slots) {
            match &results[slot] {
                Ok(r) => {
                    examples[i].explanation = r.refined.clone();
                    examples[i].explanation_kind = ExplanationKind::Refined;
                }
                Err(e) => {
                    log::warn!("refinement failed for {}: {e}", examples[i].example_id);
                    failures.push(RefineFailure {
                        example_id: examples[i].example_id.clone(),
                        error: e.to_string(),
                    });
                }
            }
        }
        BatchOutcome { examples, failures }
    }
}
