//! JSON-over-HTTP gateway backend.
//!
//! Speaks the classic completion-API shape: `POST completion_url` with
//! `{model, prompt, max_tokens, temperature, n, stop, logprobs, echo}` and
//! reads `choices[i].text` plus the per-token log-probability arrays;
//! `POST embedding_url` with `{model, input}` and reads `data[0].embedding`.
//!
//! Endpoint URLs and model names come from configuration; the API key is
//! taken from the environment only (see the config module). Failed requests
//! are retried with bounded exponential backoff on transport errors and
//! retryable statuses (429/5xx); other client errors fail fast. In-flight
//! requests are bounded by a counting semaphore.

use std::collections::BTreeMap;
use std::sync::{Condvar, Mutex};
use std::time::Duration;

use serde_json::{json, Value};

use super::{
    apply_stop_strings, Completion, Gateway, GatewayError, GenerationParams, LabelLogits,
    TokenLogProbs,
};

/// Connection settings for [`HttpGateway`].
#[derive(Debug, Clone)]
pub struct HttpGatewayConfig {
    /// Completion endpoint; `None` disables completion-family operations.
    pub completion_url: Option<String>,
    /// Embedding endpoint; `None` disables `embed`.
    pub embedding_url: Option<String>,
    /// Model name sent with completion requests.
    pub model: String,
    /// Model name sent with embedding requests.
    pub embedding_model: String,
    /// Bearer token attached as `Authorization` when present.
    pub api_key: Option<String>,
    /// Total attempts per request (first try included).
    pub max_attempts: u32,
    /// Base backoff; attempt `i` sleeps `backoff * 2^(i-1)`.
    pub backoff: Duration,
    /// Maximum concurrent in-flight requests.
    pub max_in_flight: usize,
    /// Per-request global timeout.
    pub timeout: Duration,
    /// Alternatives requested per position when scoring labels (raised to the
    /// label count when smaller).
    pub label_top_logprobs: u32,
}

impl Default for HttpGatewayConfig {
    fn default() -> Self {
        Self {
            completion_url: None,
            embedding_url: None,
            model: String::new(),
            embedding_model: String::new(),
            api_key: None,
            max_attempts: 3,
            backoff: Duration::from_millis(250),
            max_in_flight: 8,
            timeout: Duration::from_secs(120),
            label_top_logprobs: 10,
        }
    }
}

/// Counting semaphore bounding concurrent requests.
struct Semaphore {
    permits: Mutex<usize>,
    released: Condvar,
}

impl Semaphore {
    fn new(permits: usize) -> Self {
        Self {
            permits: Mutex::new(permits.max(1)),
            released: Condvar::new(),
        }
    }

    fn acquire(&self) -> SemaphoreGuard<'_> {
        let mut permits = self.permits.lock().expect("semaphore poisoned");
        while *permits == 0 {
            permits = self.released.wait(permits).expect("semaphore poisoned");
        }
        *permits -= 1;
        SemaphoreGuard { semaphore: self }
    }
}

struct SemaphoreGuard<'a> {
    semaphore: &'a Semaphore,
}

impl Drop for SemaphoreGuard<'_> {
    fn drop(&mut self) {
        let mut permits = self.semaphore.permits.lock().expect("semaphore poisoned");
        *permits += 1;
        self.semaphore.released.notify_one();
    }
}

/// Live HTTP backend.
pub struct HttpGateway {
    config: HttpGatewayConfig,
    agent: ureq::Agent,
    in_flight: Semaphore,
}

impl HttpGateway {
    #[must_use]
    pub fn new(config: HttpGatewayConfig) -> Self {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(config.timeout))
            .build()
            .into();
        let in_flight = Semaphore::new(config.max_in_flight);
        Self {
            config,
            agent,
            in_flight,
        }
    }

    fn completion_url(&self) -> Result<&str, GatewayError> {
        self.config
            .completion_url
            .as_deref()
            .ok_or_else(|| GatewayError::Unsupported("no completion endpoint configured".into()))
    }

    /// POSTs `body` with retries; returns the parsed JSON response.
    fn post_json(&self, url: &str, body: &Value) -> Result<Value, GatewayError> {
        let _permit = self.in_flight.acquire();
        let attempts = self.config.max_attempts.max(1);
        let mut last_error = String::new();
        for attempt in 1..=attempts {
            if attempt > 1 {
                let scale = 1u32 << (attempt - 2).min(16);
                std::thread::sleep(self.config.backoff * scale);
            }
            let mut request = self.agent.post(url);
            if let Some(key) = &self.config.api_key {
                request = request.header("Authorization", &format!("Bearer {key}"));
            }
            match request.send_json(body) {
                Ok(mut response) => {
                    return response
                        .body_mut()
                        .read_json::<Value>()
                        .map_err(|e| GatewayError::MalformedResponse(e.to_string()));
                }
                Err(ureq::Error::StatusCode(code)) if code == 429 || code >= 500 => {
                    last_error = format!("HTTP {code}");
                }
                Err(ureq::Error::StatusCode(code)) => {
                    // Client errors are not retryable; report immediately.
                    return Err(GatewayError::Transport {
                        attempts: attempt,
                        message: format!("HTTP {code}"),
                    });
                }
                Err(e) => {
                    last_error = e.to_string();
                }
            }
        }
        Err(GatewayError::Transport {
            attempts,
            message: last_error,
        })
    }

    /// Extracts `choices` as an array.
    fn choices(response: &Value) -> Result<&Vec<Value>, GatewayError> {
        response
            .get("choices")
            .and_then(Value::as_array)
            .ok_or_else(|| GatewayError::MalformedResponse("response lacks choices[]".into()))
    }
}

/// Reads aligned `tokens` / `token_logprobs` arrays from a choice's
/// `logprobs` object, if fully present.
fn parse_choice_logprobs(choice: &Value) -> Option<TokenLogProbs> {
    let lp = choice.get("logprobs")?;
    let tokens: Vec<String> = lp
        .get("tokens")?
        .as_array()?
        .iter()
        .map(|t| t.as_str().map(str::to_string))
        .collect::<Option<_>>()?;
    let logprobs: Vec<f64> = lp
        .get("token_logprobs")?
        .as_array()?
        .iter()
        .map(Value::as_f64)
        .collect::<Option<_>>()?;
    TokenLogProbs::new(tokens, logprobs).ok()
}

impl Gateway for HttpGateway {
    fn complete(
        &self,
        prompt: &str,
        params: &GenerationParams,
    ) -> Result<Vec<Completion>, GatewayError> {
        params.validate()?;
        let url = self.completion_url()?.to_string();
        let mut body = json!({
            "model": self.config.model,
            "prompt": prompt,
            "max_tokens": params.max_tokens,
            "temperature": params.temperature,
            "n": params.samples,
        });
        if let Some(stop) = &params.stop {
            body["stop"] = json!(stop);
        }
        let response = self.post_json(&url, &body)?;
        if let Some(error) = response.get("error") {
            return Err(GatewayError::MalformedResponse(format!(
                "endpoint error: {error}"
            )));
        }
        let choices = Self::choices(&response)?;
        if choices.len() != params.samples as usize {
            return Err(GatewayError::MalformedResponse(format!(
                "requested {} samples, endpoint returned {}",
                params.samples,
                choices.len()
            )));
        }
        let mut completions = Vec::with_capacity(choices.len());
        for choice in choices {
            let mut text = choice
                .get("text")
                .and_then(Value::as_str)
                .ok_or_else(|| GatewayError::MalformedResponse("choice lacks text".into()))?
                .to_string();
            // Endpoints already honor stop strings; enforce the contract anyway.
            apply_stop_strings(&mut text, &params.stop);
            completions.push(Completion {
                text,
                logprobs: parse_choice_logprobs(choice),
            });
        }
        Ok(completions)
    }

    fn score_labels(&self, prompt: &str, labels: &[String]) -> Result<LabelLogits, GatewayError> {
        if labels.is_empty() {
            return Err(GatewayError::InvalidArgument("no labels requested".into()));
        }
        let url = self.completion_url()?.to_string();
        let top_n = self.config.label_top_logprobs.max(labels.len() as u32);
        let body = json!({
            "model": self.config.model,
            "prompt": prompt,
            "max_tokens": 1,
            "temperature": 0.0,
            "n": 1,
            "logprobs": top_n,
        });
        let response = self.post_json(&url, &body)?;
        let choices = Self::choices(&response)?;
        let alternatives = choices
            .first()
            .and_then(|c| c.get("logprobs"))
            .and_then(|lp| lp.get("top_logprobs"))
            .and_then(Value::as_array)
            .and_then(|positions| positions.first())
            .and_then(Value::as_object)
            .ok_or_else(|| {
                GatewayError::Unsupported(
                    "endpoint did not return top_logprobs for the first position".into(),
                )
            })?;
        let mut observed: BTreeMap<String, f64> = BTreeMap::new();
        for (token, lp) in alternatives {
            let Some(lp) = lp.as_f64() else { continue };
            let trimmed = token.trim();
            if labels.iter().any(|l| l == trimmed) {
                // Keep the likeliest rendering when both "1" and " 1" appear.
                let entry = observed.entry(trimmed.to_string()).or_insert(f64::NEG_INFINITY);
                *entry = entry.max(lp);
            }
        }
        LabelLogits::from_observed(labels, &observed)
    }

    fn token_logprobs(
        &self,
        prompt: &str,
        continuation: &str,
    ) -> Result<TokenLogProbs, GatewayError> {
        if continuation.is_empty() {
            return Ok(TokenLogProbs::empty());
        }
        let url = self.completion_url()?.to_string();
        let full = format!("{prompt}{continuation}");
        let body = json!({
            "model": self.config.model,
            "prompt": full,
            "max_tokens": 0,
            "temperature": 0.0,
            "n": 1,
            "echo": true,
            "logprobs": 0,
        });
        let response = self.post_json(&url, &body)?;
        let choices = Self::choices(&response)?;
        let lp = choices
            .first()
            .and_then(|c| c.get("logprobs"))
            .ok_or_else(|| {
                GatewayError::Unsupported("endpoint does not support echo scoring".into())
            })?;
        let tokens = lp
            .get("tokens")
            .and_then(Value::as_array)
            .ok_or_else(|| GatewayError::MalformedResponse("logprobs lacks tokens".into()))?;
        let token_logprobs = lp
            .get("token_logprobs")
            .and_then(Value::as_array)
            .ok_or_else(|| {
                GatewayError::MalformedResponse("logprobs lacks token_logprobs".into())
            })?;
        let offsets = lp
            .get("text_offset")
            .and_then(Value::as_array)
            .ok_or_else(|| GatewayError::MalformedResponse("logprobs lacks text_offset".into()))?;
        if tokens.len() != token_logprobs.len() || tokens.len() != offsets.len() {
            return Err(GatewayError::MalformedResponse(
                "logprobs arrays are not aligned".into(),
            ));
        }
        let boundary = prompt.len() as u64;
        let mut out_tokens = Vec::new();
        let mut out_logprobs = Vec::new();
        for ((token, lp), offset) in tokens.iter().zip(token_logprobs).zip(offsets) {
            let offset = offset.as_u64().ok_or_else(|| {
                GatewayError::MalformedResponse("text_offset entry is not an integer".into())
            })?;
            if offset < boundary {
                continue;
            }
            let token = token.as_str().ok_or_else(|| {
                GatewayError::MalformedResponse("token entry is not a string".into())
            })?;
            let lp = lp.as_f64().ok_or_else(|| {
                GatewayError::MalformedResponse(format!(
                    "continuation token {token:?} has no log-probability"
                ))
            })?;
            out_tokens.push(token.to_string());
            out_logprobs.push(lp);
        }
        TokenLogProbs::new(out_tokens, out_logprobs)
    }

    fn embed(&self, text: &str) -> Result<Vec<f64>, GatewayError> {
        if text.is_empty() {
            return Err(GatewayError::InvalidArgument(
                "cannot embed an empty string".into(),
            ));
        }
        let url = self
            .config
            .embedding_url
            .as_deref()
            .ok_or_else(|| GatewayError::Unsupported("no embedding endpoint configured".into()))?
            .to_string();
        let body = json!({
            "model": self.config.embedding_model,
            "input": text,
        });
        let response = self.post_json(&url, &body)?;
        let vector: Vec<f64> = response
            .get("data")
            .and_then(Value::as_array)
            .and_then(|d| d.first())
            .and_then(|d| d.get("embedding"))
            .and_then(Value::as_array)
            .map(|vs| vs.iter().filter_map(Value::as_f64).collect())
            .ok_or_else(|| {
                GatewayError::MalformedResponse("response lacks data[0].embedding".into())
            })?;
        if vector.is_empty() || vector.iter().all(|v| v.abs() < f64::EPSILON) {
            return Err(GatewayError::MalformedResponse(
                "embedding endpoint returned an empty or zero vector".into(),
            ));
        }
        Ok(vector)
    }
}
