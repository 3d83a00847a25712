//! Uniform access to text-completion, label-scoring, continuation-scoring,
//! and embedding endpoints.
//!
//! Two backends implement [`Gateway`]: [`MockGateway`] (a pure function of
//! seed and request, optionally backed by a recorded fixture file) and
//! [`HttpGateway`] (a JSON-over-HTTP client). Everything downstream of the
//! trait is backend-agnostic, so any pipeline run with the mock backend is
//! bit-reproducible.
//!
//! The gateway never parses code: completions are returned as raw text, and
//! [`extract_code`] is the single documented post-processor (stop-marker
//! truncation plus markdown-fence stripping).

mod http;
mod mock;

pub use http::{HttpGateway, HttpGatewayConfig};
pub use mock::{MockFixtures, MockGateway};

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Errors shared by every backend.
#[derive(Debug, Error)]
pub enum GatewayError {
    #[error("transport failure after {attempts} attempt(s): {message}")]
    Transport { attempts: u32, message: String },
    #[error("malformed endpoint response: {0}")]
    MalformedResponse(String),
    #[error("endpoint does not support this operation: {0}")]
    Unsupported(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("prompt plus continuation exceed the context limit: {0}")]
    ContextLength(String),
    #[error("fixture file error: {0}")]
    Fixture(String),
}

/// Sampling parameters for text completion.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationParams {
    /// Softmax temperature, finite and ≥ 0.
    pub temperature: f64,
    /// Maximum tokens to generate per sample.
    pub max_tokens: u32,
    /// Strings that terminate generation; never included in returned text.
    pub stop: Option<Vec<String>>,
    /// Number of independent samples to return.
    pub samples: u32,
}

impl Default for GenerationParams {
    fn default() -> Self {
        Self {
            temperature: 0.7,
            max_tokens: 1024,
            stop: None,
            samples: 1,
        }
    }
}

impl GenerationParams {
    /// Checks the parameter invariants.
    pub fn validate(&self) -> Result<(), GatewayError> {
        if !self.temperature.is_finite() || self.temperature < 0.0 {
            return Err(GatewayError::InvalidArgument(format!(
                "temperature {} must be finite and >= 0",
                self.temperature
            )));
        }
        if self.samples == 0 {
            return Err(GatewayError::InvalidArgument("samples must be >= 1".into()));
        }
        if self.max_tokens == 0 {
            return Err(GatewayError::InvalidArgument(
                "max_tokens must be >= 1".into(),
            ));
        }
        Ok(())
    }
}

/// Aligned tokens and natural-log probabilities for a scored continuation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TokenLogProbs {
    tokens: Vec<String>,
    logprobs: Vec<f64>,
}

impl TokenLogProbs {
    /// Tolerance for log-probabilities that float slightly above zero.
    const POSITIVE_SLACK: f64 = 1e-9;

    /// Builds an aligned token/log-probability sequence.
    ///
    /// Lengths must match and every log-probability must be ≤ 0 (within a
    /// 1e-9 slack for endpoint rounding) and non-NaN.
    pub fn new(tokens: Vec<String>, logprobs: Vec<f64>) -> Result<Self, GatewayError> {
        if tokens.len() != logprobs.len() {
            return Err(GatewayError::InvalidArgument(format!(
                "{} tokens but {} logprobs",
                tokens.len(),
                logprobs.len()
            )));
        }
        for (i, &lp) in logprobs.iter().enumerate() {
            if lp.is_nan() || lp > Self::POSITIVE_SLACK {
                return Err(GatewayError::InvalidArgument(format!(
                    "logprob[{i}] = {lp} is not a log-probability"
                )));
            }
        }
        Ok(Self { tokens, logprobs })
    }

    /// An empty sequence (e.g. scoring an empty continuation).
    #[must_use]
    pub fn empty() -> Self {
        Self {
            tokens: Vec::new(),
            logprobs: Vec::new(),
        }
    }

    #[must_use]
    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    #[must_use]
    pub fn logprobs(&self) -> &[f64] {
        &self.logprobs
    }

    #[must_use]
    pub fn len(&self) -> usize {
        self.logprobs.len()
    }

    #[must_use]
    pub fn is_empty(&self) -> bool {
        self.logprobs.is_empty()
    }

    /// Σ log p.
    #[must_use]
    pub fn sum(&self) -> f64 {
        self.logprobs.iter().sum()
    }
}

/// Per-label first-position logits, exactly one entry per requested label
/// after floor-filling.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelLogits {
    label_logits: BTreeMap<String, f64>,
}

impl LabelLogits {
    /// Floor distance applied to labels missing from the endpoint's
    /// top-alternatives list: (minimum observed logit − 10).
    pub const MISSING_LABEL_GAP: f64 = 10.0;

    /// Builds the map from observed `(label, logit)` pairs, floor-filling
    /// any requested label the endpoint did not report.
    ///
    /// At least one label must have been observed.
    pub fn from_observed(
        labels: &[String],
        observed: &BTreeMap<String, f64>,
    ) -> Result<Self, GatewayError> {
        if labels.is_empty() {
            return Err(GatewayError::InvalidArgument("no labels requested".into()));
        }
        let min_observed = labels
            .iter()
            .filter_map(|l| observed.get(l))
            .copied()
            .fold(f64::INFINITY, f64::min);
        if !min_observed.is_finite() {
            return Err(GatewayError::MalformedResponse(
                "endpoint reported none of the requested labels".into(),
            ));
        }
        let floor = min_observed - Self::MISSING_LABEL_GAP;
        let label_logits = labels
            .iter()
            .map(|l| (l.clone(), observed.get(l).copied().unwrap_or(floor)))
            .collect();
        Ok(Self { label_logits })
    }

    #[must_use]
    pub fn get(&self, label: &str) -> Option<f64> {
        self.label_logits.get(label).copied()
    }

    /// Logits in the order of `labels`; `None` if any label is absent.
    #[must_use]
    pub fn ordered(&self, labels: &[String]) -> Option<Vec<f64>> {
        labels
            .iter()
            .map(|l| self.label_logits.get(l).copied())
            .collect()
    }

    #[must_use]
    pub fn len(&self) -> usize {
        self.label_logits.len()
    }

    #[must_use]
    pub fn is_empty(&self) -> bool {
        self.label_logits.is_empty()
    }
}

/// One completion sample: raw text plus per-token log-probabilities when the
/// endpoint reports them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Completion {
    pub text: String,
    pub logprobs: Option<TokenLogProbs>,
}

/// Backend-agnostic LLM access used by every pipeline stage.
pub trait Gateway: Send + Sync {
    /// Generates `params.samples` completions for `prompt`.
    ///
    /// Returned text is raw (no post-processing) except that configured stop
    /// strings are guaranteed absent.
    fn complete(
        &self,
        prompt: &str,
        params: &GenerationParams,
    ) -> Result<Vec<Completion>, GatewayError>;

    /// First-position logits for each of `labels` (single-token strings),
    /// floor-filled per [`LabelLogits::from_observed`].
    fn score_labels(&self, prompt: &str, labels: &[String]) -> Result<LabelLogits, GatewayError>;

    /// Log-probabilities of `continuation`'s tokens given `prompt`
    /// (teacher-forcing); covers exactly the continuation, not the prompt.
    fn token_logprobs(
        &self,
        prompt: &str,
        continuation: &str,
    ) -> Result<TokenLogProbs, GatewayError>;

    /// Embedding vector for `text`; fixed dimension per backend, never zero.
    fn embed(&self, text: &str) -> Result<Vec<f64>, GatewayError>;
}

impl Gateway for Box<dyn Gateway> {
    fn complete(
        &self,
        prompt: &str,
        params: &GenerationParams,
    ) -> Result<Vec<Completion>, GatewayError> {
        (**self).complete(prompt, params)
    }

    fn score_labels(&self, prompt: &str, labels: &[String]) -> Result<LabelLogits, GatewayError> {
        (**self).score_labels(prompt, labels)
    }

    fn token_logprobs(
        &self,
        prompt: &str,
        continuation: &str,
    ) -> Result<TokenLogProbs, GatewayError> {
        (**self).token_logprobs(prompt, continuation)
    }

    fn embed(&self, text: &str) -> Result<Vec<f64>, GatewayError> {
        (**self).embed(text)
    }
}

/// The terminator the style-aware prompt asks generations to end with.
pub const END_OF_CODE_MARKER: &str = "End of Code";

/// Extracts code from a raw completion.
///
/// Post-processing steps, in order:
///
/// 1. truncate at the first `"End of Code"` marker (the comment prefix on the
///    marker line is dropped with it);
/// 2. strip one surrounding pair of markdown fences if present, including any
///    language tag on the opening fence;
/// 3. trim leading/trailing blank lines (interior whitespace untouched).
#[must_use]
pub fn extract_code(completion: &str) -> String {
    let mut text = completion;
    if let Some(pos) = text.find(END_OF_CODE_MARKER) {
        text = &text[..pos];
        // Drop a trailing comment opener left on the marker line ("// ", "# ").
        let cut = text.rfind('\n').map_or(0, |i| i + 1);
        if text[cut..]
            .trim()
            .chars()
            .all(|c| matches!(c, '/' | '#' | '*' | '-' | ';' | '%' | '(' | '\'' | '"' | ' '))
        {
            text = &text[..cut];
        }
    }
    let mut lines: Vec<&str> = text.lines().collect();
    while lines.first().is_some_and(|l| l.trim().is_empty()) {
        lines.remove(0);
    }
    while lines.last().is_some_and(|l| l.trim().is_empty()) {
        lines.pop();
    }
    if lines.first().is_some_and(|l| l.trim_start().starts_with("```")) {
        lines.remove(0);
        if lines.last().is_some_and(|l| l.trim() == "```") {
            lines.pop();
        }
        while lines.last().is_some_and(|l| l.trim().is_empty()) {
            lines.pop();
        }
    }
    lines.join("\n")
}

/// Truncates `text` at the first occurrence of any stop string.
pub(crate) fn apply_stop_strings(text: &mut String, stop: &Option<Vec<String>>) {
    if let Some(stops) = stop {
        let mut cut = text.len();
        for s in stops {
            if s.is_empty() {
                continue;
            }
            if let Some(pos) = text.find(s.as_str()) {
                cut = cut.min(pos);
            }
        }
        text.truncate(cut);
    }
}
