//! Deterministic offline gateway.
//!
//! Responses come from a recorded fixture file keyed by request hash; any
//! request without a fixture entry falls back to seeded synthesis. Both paths
//! are pure functions of `(seed, request)`, so a pipeline run against the
//! mock backend is bit-reproducible and needs no network.

use std::collections::BTreeMap;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{
    apply_stop_strings, Completion, Gateway, GatewayError, GenerationParams, LabelLogits,
    TokenLogProbs,
};
use crate::util::sha256_hex;

/// Recorded responses, keyed by the request hashes below.
///
/// The file format is a single JSON object with one map per operation; all
/// maps are optional. Keys are produced by [`MockGateway::completion_key`]
/// and friends so fixture writers never hand-compute hashes.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct MockFixtures {
    /// completion_key(prompt) → one entry per sample index.
    #[serde(default)]
    pub completions: BTreeMap<String, Vec<String>>,
    /// labels_key(prompt) → observed label→logit map (floor-filling still applies).
    #[serde(default)]
    pub label_logits: BTreeMap<String, BTreeMap<String, f64>>,
    /// logprobs_key(prompt, continuation) → [(token, logprob), ...].
    #[serde(default)]
    pub token_logprobs: BTreeMap<String, Vec<(String, f64)>>,
    /// embed_key(text) → embedding vector.
    #[serde(default)]
    pub embeddings: BTreeMap<String, Vec<f64>>,
}

impl MockFixtures {
    /// Reads a fixture file (JSON).
    pub fn load(path: &Path) -> Result<Self, GatewayError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| GatewayError::Fixture(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text)
            .map_err(|e| GatewayError::Fixture(format!("{}: {e}", path.display())))
    }

    /// Writes the fixture file (pretty JSON, stable key order).
    pub fn save(&self, path: &Path) -> Result<(), GatewayError> {
        let text = serde_json::to_string_pretty(self)
            .map_err(|e| GatewayError::Fixture(e.to_string()))?;
        std::fs::write(path, text)
            .map_err(|e| GatewayError::Fixture(format!("{}: {e}", path.display())))
    }
}

/// Pure-function gateway for offline runs and tests.
#[derive(Debug, Clone)]
pub struct MockGateway {
    seed: u64,
    fixtures: MockFixtures,
    embed_dim: usize,
    /// Context budget in characters (prompt + continuation).
    context_limit: usize,
}

impl MockGateway {
    /// A mock with no fixtures: every response is synthesized from the seed.
    #[must_use]
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            fixtures: MockFixtures::default(),
            embed_dim: 64,
            context_limit: 1_000_000,
        }
    }

    /// Installs recorded fixtures.
    #[must_use]
    pub fn with_fixtures(mut self, fixtures: MockFixtures) -> Self {
        self.fixtures = fixtures;
        self
    }

    /// Loads fixtures from a file.
    pub fn with_fixture_file(self, path: &Path) -> Result<Self, GatewayError> {
        Ok(self.with_fixtures(MockFixtures::load(path)?))
    }

    /// Overrides the synthesized embedding dimensionality (default 64).
    #[must_use]
    pub fn with_embed_dim(mut self, dim: usize) -> Self {
        self.embed_dim = dim.max(1);
        self
    }

    /// Overrides the context budget in characters (default 1,000,000).
    #[must_use]
    pub fn with_context_limit(mut self, chars: usize) -> Self {
        self.context_limit = chars;
        self
    }

    /// Fixture key for a completion request.
    #[must_use]
    pub fn completion_key(prompt: &str) -> String {
        sha256_hex(&[b"complete", prompt.as_bytes()])
    }

    /// Fixture key for a label-scoring request.
    #[must_use]
    pub fn labels_key(prompt: &str) -> String {
        sha256_hex(&[b"score_labels", prompt.as_bytes()])
    }

    /// Fixture key for a continuation-scoring request.
    #[must_use]
    pub fn logprobs_key(prompt: &str, continuation: &str) -> String {
        sha256_hex(&[b"token_logprobs", prompt.as_bytes(), continuation.as_bytes()])
    }

    /// Fixture key for an embedding request.
    #[must_use]
    pub fn embed_key(text: &str) -> String {
        sha256_hex(&[b"embed", text.as_bytes()])
    }

    fn check_context(&self, chars: usize) -> Result<(), GatewayError> {
        if chars > self.context_limit {
            return Err(GatewayError::ContextLength(format!(
                "{chars} characters exceed the mock context limit of {}",
                self.context_limit
            )));
        }
        Ok(())
    }

    /// Seeded RNG derived from the request, independent per `parts`.
    fn rng(&self, parts: &[&[u8]]) -> ChaCha8Rng {
        let mut keyed: Vec<&[u8]> = vec![b"mock"];
        let seed_bytes = self.seed.to_le_bytes();
        keyed.push(&seed_bytes);
        keyed.extend_from_slice(parts);
        let hex = sha256_hex(&keyed);
        let word = u64::from_str_radix(&hex[..16], 16).expect("hex digest");
        ChaCha8Rng::seed_from_u64(word)
    }
}

impl Gateway for MockGateway {
    fn complete(
        &self,
        prompt: &str,
        params: &GenerationParams,
    ) -> Result<Vec<Completion>, GatewayError> {
        params.validate()?;
        self.check_context(prompt.len())?;
        let recorded = self.fixtures.completions.get(&Self::completion_key(prompt));
        let mut out = Vec::with_capacity(params.samples as usize);
        for i in 0..params.samples {
            let mut text = match recorded.and_then(|entries| entries.get(i as usize)) {
                Some(entry) => entry.clone(),
                None => {
                    let mut rng = self.rng(&[b"complete", prompt.as_bytes(), &i.to_le_bytes()]);
                    format!(
                        "// synthesized completion sample {i} ({:016x})\n",
                        rng.gen::<u64>()
                    )
                }
            };
            apply_stop_strings(&mut text, &params.stop);
            out.push(Completion {
                text,
                logprobs: None,
            });
        }
        Ok(out)
    }

    fn score_labels(&self, prompt: &str, labels: &[String]) -> Result<LabelLogits, GatewayError> {
        if labels.is_empty() {
            return Err(GatewayError::InvalidArgument("no labels requested".into()));
        }
        self.check_context(prompt.len())?;
        if let Some(observed) = self.fixtures.label_logits.get(&Self::labels_key(prompt)) {
            return LabelLogits::from_observed(labels, observed);
        }
        let mut observed = BTreeMap::new();
        for label in labels {
            let mut rng = self.rng(&[b"score_labels", prompt.as_bytes(), label.as_bytes()]);
            observed.insert(label.clone(), -rng.gen_range(0.0..8.0));
        }
        LabelLogits::from_observed(labels, &observed)
    }

    fn token_logprobs(
        &self,
        prompt: &str,
        continuation: &str,
    ) -> Result<TokenLogProbs, GatewayError> {
        self.check_context(prompt.len() + continuation.len())?;
        if continuation.is_empty() {
            return Ok(TokenLogProbs::empty());
        }
        let key = Self::logprobs_key(prompt, continuation);
        if let Some(entries) = self.fixtures.token_logprobs.get(&key) {
            let (tokens, logprobs) = entries.iter().cloned().unzip();
            return TokenLogProbs::new(tokens, logprobs);
        }
        let mut tokens = Vec::new();
        let mut logprobs = Vec::new();
        for (i, word) in continuation.split_whitespace().enumerate() {
            let mut rng = self.rng(&[
                b"token_logprobs",
                word.as_bytes(),
                &(i as u64).to_le_bytes(),
            ]);
            tokens.push(word.to_string());
            logprobs.push(-rng.gen_range(0.05..0.95));
        }
        TokenLogProbs::new(tokens, logprobs)
    }

    fn embed(&self, text: &str) -> Result<Vec<f64>, GatewayError> {
        if text.is_empty() {
            return Err(GatewayError::InvalidArgument(
                "cannot embed an empty string".into(),
            ));
        }
        self.check_context(text.len())?;
        if let Some(vector) = self.fixtures.embeddings.get(&Self::embed_key(text)) {
            if vector.iter().all(|v| v.abs() < f64::EPSILON) {
                return Err(GatewayError::Fixture(
                    "fixture embedding is the zero vector".into(),
                ));
            }
            return Ok(vector.clone());
        }
        let mut rng = self.rng(&[b"embed", text.as_bytes()]);
        let mut vector: Vec<f64> = (0..self.embed_dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
        if vector.iter().all(|v| v.abs() < 1e-9) {
            vector[0] = 1.0;
        }
        Ok(vector)
    }
}
