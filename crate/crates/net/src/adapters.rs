//! JSON-over-HTTP clients for the external generator, scorer and detector.
//!
//! Wire contract:
//!
//! | endpoint        | request                                        | response           |
//! |-----------------|------------------------------------------------|--------------------|
//! | `POST /generate`| `{prompt, max_sentences, temperature, top_k}`  | `{text}`           |
//! | `POST /score`   | `{context: [..], candidates: [..]}`            | `{probs: [..]}`    |
//! | `POST /predict` | `{text}`                                       | `{label, score?}`  |
//!
//! Every body also carries a client-generated `request_id`, repeated in the
//! `X-Request-Id` header, and kept identical across retries.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::thread;
use std::time::Duration;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use thiserror::Error;
use ureq::Agent;
use vforge_core::dataset::Label;
use vforge_core::error::{GeneratorError, ScorerError};
use vforge_core::extension::{Generator, GeneratorRequest};
use vforge_core::lm::Scorer;

pub const GENERATOR_URL_VAR: &str = "VFORGE_GENERATOR_URL";
pub const SCORER_URL_VAR: &str = "VFORGE_SCORER_URL";
pub const DETECTOR_URL_VAR: &str = "VFORGE_DETECTOR_URL";
pub const TOKEN_VAR: &str = "VFORGE_TOKEN";
pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(60);
pub const DEFAULT_CONCURRENCY: usize = 8;
pub const MAX_ATTEMPTS: usize = 3;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AdapterError {
    /// Non-success HTTP status, or no status at all when the connection failed.
    #[error("transport error{}: {message}", status.map(|s| format!(" (HTTP {s})")).unwrap_or_default())]
    Transport {
        status: Option<u16>,
        message: String,
    },
    #[error("request timed out")]
    Timeout,
    #[error("malformed response: {0}")]
    MalformedResponse(String),
    #[error("probability {0} outside (0, 1]")]
    BadProbability(f64),
    #[error("{0} is not set")]
    MissingEndpoint(&'static str),
}

impl AdapterError {
    fn retryable(&self) -> bool {
        match self {
            AdapterError::Timeout => true,
            AdapterError::Transport { status: None, .. } => true,
            AdapterError::Transport {
                status: Some(s), ..
            } => *s >= 500,
            _ => false,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ClientConfig {
    pub timeout: Duration,
    pub max_attempts: usize,
    /// Delay before the first retry; doubled for each further one.
    pub backoff: Duration,
    pub token: Option<String>,
}

impl Default for ClientConfig {
    fn default() -> Self {
        ClientConfig {
            timeout: DEFAULT_TIMEOUT,
            max_attempts: MAX_ATTEMPTS,
            backoff: Duration::from_millis(250),
            token: None,
        }
    }
}

impl ClientConfig {
    /// Defaults plus the bearer token from the environment, if any.
    pub fn from_env() -> Self {
        ClientConfig {
            token: std::env::var(TOKEN_VAR).ok().filter(|t| !t.is_empty()),
            ..ClientConfig::default()
        }
    }
}

#[derive(Serialize)]
struct Envelope<'a, T> {
    request_id: &'a str,
    #[serde(flatten)]
    body: &'a T,
}

/// Shared HTTP plumbing: timeouts, retries with exponential backoff, request ids.
#[derive(Debug, Clone)]
pub struct JsonClient {
    agent: Agent,
    config: ClientConfig,
}

impl JsonClient {
    pub fn new(config: ClientConfig) -> Self {
        let agent: Agent = Agent::config_builder()
            .timeout_global(Some(config.timeout))
            .http_status_as_error(false)
            .build()
            .into();
        JsonClient { agent, config }
    }

    pub fn config(&self) -> &ClientConfig {
        &self.config
    }

    pub fn post<Req: Serialize, Resp: DeserializeOwned>(
        &self,
        url: &str,
        body: &Req,
    ) -> Result<Resp, AdapterError> {
        let request_id = uuid::Uuid::new_v4().to_string();
        let payload = serde_json::to_string(&Envelope {
            request_id: &request_id,
            body,
        })
        .map_err(|e| AdapterError::MalformedResponse(format!("request encoding failed: {e}")))?;
        let attempts = self.config.max_attempts.max(1);
        let mut delay = self.config.backoff;
        let mut last = None;
        for attempt in 0..attempts {
            if attempt > 0 {
                thread::sleep(delay);
                delay *= 2;
            }
            match self.attempt(url, &request_id, &payload) {
                Ok(text) => {
                    return serde_json::from_str(&text)
                        .map_err(|e| AdapterError::MalformedResponse(e.to_string()))
                }
                Err(e) if e.retryable() => last = Some(e),
                Err(e) => return Err(e),
            }
        }
        Err(last.expect("at least one attempt"))
    }

    fn attempt(&self, url: &str, request_id: &str, payload: &str) -> Result<String, AdapterError> {
        let mut req = self
            .agent
            .post(url)
            .header("X-Request-Id", request_id)
            .content_type("application/json");
        if let Some(token) = &self.config.token {
            req = req.header("Authorization", format!("Bearer {token}"));
        }
        let mut resp = req.send(payload).map_err(transport)?;
        let status = resp.status().as_u16();
        let body = resp.body_mut().read_to_string().map_err(transport)?;
        if !(200..300).contains(&status) {
            return Err(AdapterError::Transport {
                status: Some(status),
                message: body.chars().take(200).collect(),
            });
        }
        Ok(body)
    }
}

fn transport(e: ureq::Error) -> AdapterError {
    match e {
        ureq::Error::Timeout(_) => AdapterError::Timeout,
        ureq::Error::Io(io) if io.kind() == std::io::ErrorKind::TimedOut => AdapterError::Timeout,
        ureq::Error::StatusCode(s) => AdapterError::Transport {
            status: Some(s),
            message: String::new(),
        },
        other => AdapterError::Transport {
            status: None,
            message: other.to_string(),
        },
    }
}

fn endpoint(base: &str, path: &str) -> String {
    format!("{}/{}", base.trim_end_matches('/'), path)
}

fn env_url(var: &'static str) -> Result<String, AdapterError> {
    std::env::var(var)
        .ok()
        .filter(|v| !v.is_empty())
        .ok_or(AdapterError::MissingEndpoint(var))
}

#[derive(Deserialize)]
struct GenerateResponse {
    text: String,
}

#[derive(Debug, Clone)]
pub struct HttpGenerator {
    client: JsonClient,
    url: String,
}

impl HttpGenerator {
    pub fn new(base_url: &str, config: ClientConfig) -> Self {
        HttpGenerator {
            client: JsonClient::new(config),
            url: endpoint(base_url, "generate"),
        }
    }

    pub fn from_env() -> Result<Self, AdapterError> {
        Ok(Self::new(
            &env_url(GENERATOR_URL_VAR)?,
            ClientConfig::from_env(),
        ))
    }

    /// Raw continuation; may be empty.
    pub fn request(&self, request: &GeneratorRequest) -> Result<String, AdapterError> {
        let resp: GenerateResponse = self.client.post(&self.url, request)?;
        Ok(resp.text)
    }
}

impl Generator for HttpGenerator {
    fn generate(&self, request: &GeneratorRequest) -> Result<String, GeneratorError> {
        self.request(request)
            .map_err(|e| GeneratorError(e.to_string()))
    }
}

#[derive(Serialize)]
struct ScoreRequest<'a> {
    context: &'a [String],
    candidates: &'a [&'a str],
}

#[derive(Deserialize)]
struct ScoreResponse {
    probs: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct RemoteScorer {
    client: JsonClient,
    url: String,
    window: Option<usize>,
}

impl RemoteScorer {
    pub fn new(base_url: &str, config: ClientConfig) -> Self {
        RemoteScorer {
            client: JsonClient::new(config),
            url: endpoint(base_url, "score"),
            window: None,
        }
    }

    pub fn from_env() -> Result<Self, AdapterError> {
        Ok(Self::new(
            &env_url(SCORER_URL_VAR)?,
            ClientConfig::from_env(),
        ))
    }

    /// Send at most the last `terms` context terms.
    pub fn with_context_window(mut self, terms: usize) -> Self {
        self.window = Some(terms);
        self
    }

    pub fn score_tokens(
        &self,
        context: &[String],
        candidates: &[&str],
    ) -> Result<Vec<f64>, AdapterError> {
        if candidates.is_empty() {
            return Ok(Vec::new());
        }
        let keep = self.window.map_or(context.len(), |w| w.min(context.len()));
        let context = &context[context.len() - keep..];
        let resp: ScoreResponse = self.client.post(
            &self.url,
            &ScoreRequest {
                context,
                candidates,
            },
        )?;
        if resp.probs.len() != candidates.len() {
            return Err(AdapterError::MalformedResponse(format!(
                "expected {} probabilities, got {}",
                candidates.len(),
                resp.probs.len()
            )));
        }
        if let Some(&bad) = resp.probs.iter().find(|p| !(**p > 0.0 && **p <= 1.0)) {
            return Err(AdapterError::BadProbability(bad));
        }
        Ok(resp.probs)
    }
}

impl Scorer for RemoteScorer {
    fn next_token_prob(&self, context: &[String], candidate: &str) -> Result<f64, ScorerError> {
        Ok(self.candidate_probs(context, &[candidate])?[0])
    }

    fn candidate_probs(
        &self,
        context: &[String],
        candidates: &[&str],
    ) -> Result<Vec<f64>, ScorerError> {
        self.score_tokens(context, candidates)
            .map_err(|e| ScorerError(e.to_string()))
    }

    fn context_window(&self) -> Option<usize> {
        self.window
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectorResponse {
    pub label: Label,
    /// Probability of `fake`, when the detector reports one.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub score: Option<f64>,
}

#[derive(Serialize)]
struct PredictRequest<'a> {
    text: &'a str,
}

#[derive(Deserialize)]
struct PredictWire {
    label: String,
    #[serde(default)]
    score: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct DetectorClient {
    client: JsonClient,
    url: String,
    concurrency: usize,
}

impl DetectorClient {
    pub fn new(base_url: &str, config: ClientConfig) -> Self {
        DetectorClient {
            client: JsonClient::new(config),
            url: endpoint(base_url, "predict"),
            concurrency: DEFAULT_CONCURRENCY,
        }
    }

    pub fn from_env() -> Result<Self, AdapterError> {
        Ok(Self::new(
            &env_url(DETECTOR_URL_VAR)?,
            ClientConfig::from_env(),
        ))
    }

    pub fn with_concurrency(mut self, in_flight: usize) -> Self {
        self.concurrency = in_flight.max(1);
        self
    }

    pub fn detect(&self, text: &str) -> Result<DetectorResponse, AdapterError> {
        let wire: PredictWire = self.client.post(&self.url, &PredictRequest { text })?;
        let label = match wire.label.as_str() {
            "real" => Label::Real,
            "fake" => Label::Fake,
            other => {
                return Err(AdapterError::MalformedResponse(format!(
                    "unknown label {other:?}"
                )))
            }
        };
        if let Some(s) = wire.score {
            if !(0.0..=1.0).contains(&s) {
                return Err(AdapterError::MalformedResponse(format!(
                    "score {s} outside [0, 1]"
                )));
            }
        }
        Ok(DetectorResponse {
            label,
            score: wire.score,
        })
    }

    /// Classify many texts with a bounded number of requests in flight.
    /// Results come back in input order.
    pub fn detect_batch<S: AsRef<str> + Sync>(
        &self,
        texts: &[S],
    ) -> Vec<Result<DetectorResponse, AdapterError>> {
        let next = AtomicUsize::new(0);
        let results: Mutex<Vec<Option<Result<DetectorResponse, AdapterError>>>> =
            Mutex::new(vec![None; texts.len()]);
        let workers = self.concurrency.min(texts.len());
        thread::scope(|scope| {
            for _ in 0..workers {
                scope.spawn(|| loop {
                    let i = next.fetch_add(1, Ordering::Relaxed);
                    if i >= texts.len() {
                        break;
                    }
                    let r = self.detect(texts[i].as_ref());
                    results.lock().expect("results lock")[i] = Some(r);
                });
            }
        });
        results
            .into_inner()
            .expect("results lock")
            .into_iter()
            .map(|r| r.expect("every index processed"))
            .collect()
    }
}
