//! Relevance-driven code-pair selection.
//!
//! Pair mining runs in two stages: embedding **recall** narrows a candidate
//! pool to the `recall_k` most similar snippets, then an LLM **judge** scores
//! each survivor's relevance to the source snippet. The judge asks for a
//! label from 1 to K and reads the label *logits* rather than sampled text:
//! the expected label under the softmax of those logits,
//!
//! `score = Σ_k softmax(s)_k · k`,
//!
//! is a smooth relevance signal in [1, K]. An alternative `explicit` mode
//! parses a generated label instead, for measuring how much the aggregation
//! buys.

use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::CodeSnippet;
use crate::gateway::{Gateway, GatewayError, GenerationParams};
use crate::prompt::{judge_template_for_k, PromptError, PromptTemplate};

/// Errors from recall, judging, or pair selection.
#[derive(Debug, Error)]
pub enum PairingError {
    #[error("embedding dimensions differ: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },
    #[error("cosine similarity is undefined for a zero vector")]
    ZeroVector,
    #[error("candidate list is empty")]
    NoCandidates,
    #[error("invalid judge configuration: {0}")]
    InvalidConfig(String),
    #[error("judge generation {text:?} contains no integer label")]
    UnparsableLabel { text: String },
    #[error("judge label {value} is outside 1..={k}")]
    LabelOutOfRange { value: u32, k: u32 },
    #[error("all {attempted} judged candidates failed; last error: {last_error}")]
    AllCandidatesFailed { attempted: usize, last_error: String },
    #[error("embedding cache at {path}: {message}")]
    Cache { path: PathBuf, message: String },
    #[error(transparent)]
    Prompt(#[from] PromptError),
    #[error(transparent)]
    Gateway(#[from] GatewayError),
}

/// How the judge turns model output into a relevance score.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum JudgeMode {
    /// Read label logits and take the softmax-expected label (the default).
    Aggregate,
    /// Parse a generated integer label directly.
    Explicit,
}

/// Judge settings: label count, recall width, and scoring mode.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct JudgeConfig {
    /// Number of relevance labels (2..=9; labels must stay single-token).
    pub k: u32,
    /// How many candidates embedding recall keeps for judging.
    pub recall_k: usize,
    pub mode: JudgeMode,
}

impl Default for JudgeConfig {
    fn default() -> Self {
        Self {
            k: 5,
            recall_k: 10,
            mode: JudgeMode::Aggregate,
        }
    }
}

impl JudgeConfig {
    pub fn validate(&self) -> Result<(), PairingError> {
        if !(2..=9).contains(&self.k) {
            return Err(PairingError::InvalidConfig(format!(
                "label count {} must be in 2..=9",
                self.k
            )));
        }
        if self.recall_k == 0 {
            return Err(PairingError::InvalidConfig(
                "recall_k must be >= 1".into(),
            ));
        }
        Ok(())
    }
}

/// Judge output: raw logits per label, their softmax, and the expected label.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JudgeDistribution {
    pub logits: Vec<f64>,
    pub probs: Vec<f64>,
    pub score: f64,
}

impl JudgeDistribution {
    /// Softmax the logits (shift-stable) and take the expected label value.
    /// Logit index `i` corresponds to label `i + 1`.
    pub fn from_logits(logits: Vec<f64>) -> Result<Self, PairingError> {
        if logits.is_empty() {
            return Err(PairingError::InvalidConfig("no logits to score".into()));
        }
        if logits.iter().any(|l| !l.is_finite()) {
            return Err(PairingError::InvalidConfig(
                "judge logits must be finite".into(),
            ));
        }
        let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let weights: Vec<f64> = logits.iter().map(|l| (l - max).exp()).collect();
        let total: f64 = weights.iter().sum();
        let probs: Vec<f64> = weights.iter().map(|w| w / total).collect();
        let score = probs
            .iter()
            .enumerate()
            .map(|(i, p)| p * (i + 1) as f64)
            .sum();
        Ok(Self {
            logits,
            probs,
            score,
        })
    }
}

/// Cosine similarity between two embeddings, clamped to [−1, 1].
pub fn cosine_similarity(a: &[f64], b: &[f64]) -> Result<f64, PairingError> {
    if a.len() != b.len() {
        return Err(PairingError::DimensionMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let norm_a = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let norm_b = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm_a == 0.0 || norm_b == 0.0 {
        return Err(PairingError::ZeroVector);
    }
    Ok((dot / (norm_a * norm_b)).clamp(-1.0, 1.0))
}

/// Embedding provider with an in-memory cache keyed by snippet content hash,
/// optionally persisted to a JSON file so repeated runs skip the gateway.
pub struct Embedder<'g> {
    gateway: &'g dyn Gateway,
    cache: Mutex<HashMap<String, Vec<f64>>>,
    disk_path: Option<PathBuf>,
}

impl<'g> Embedder<'g> {
    pub fn new(gateway: &'g dyn Gateway) -> Self {
        Self {
            gateway,
            cache: Mutex::new(HashMap::new()),
            disk_path: None,
        }
    }

    /// Load any previously persisted cache from `path`; [`Self::persist`]
    /// writes back to the same file.
    pub fn with_disk_cache(gateway: &'g dyn Gateway, path: &Path) -> Result<Self, PairingError> {
        let mut cache = HashMap::new();
        if path.exists() {
            let raw = std::fs::read_to_string(path).map_err(|e| PairingError::Cache {
                path: path.to_path_buf(),
                message: e.to_string(),
            })?;
            cache = serde_json::from_str(&raw).map_err(|e| PairingError::Cache {
                path: path.to_path_buf(),
                message: e.to_string(),
            })?;
        }
        Ok(Self {
            gateway,
            cache: Mutex::new(cache),
            disk_path: Some(path.to_path_buf()),
        })
    }

    pub fn gateway(&self) -> &'g dyn Gateway {
        self.gateway
    }

    /// Embed a snippet, consulting the cache first. Identical source text in
    /// the same language shares one cache entry regardless of snippet id.
    pub fn embed(&self, snippet: &CodeSnippet) -> Result<Vec<f64>, PairingError> {
        let key = snippet.content_hash();
        if let Some(hit) = self.cache.lock().expect("embed cache poisoned").get(&key) {
            return Ok(hit.clone());
        }
        let vector = self.gateway.embed(&snippet.source_text)?;
        self.cache
            .lock()
            .expect("embed cache poisoned")
            .insert(key, vector.clone());
        Ok(vector)
    }

    /// Write the cache to the disk path, if one was configured.
    pub fn persist(&self) -> Result<(), PairingError> {
        let Some(path) = &self.disk_path else {
            return Ok(());
        };
        let cache = self.cache.lock().expect("embed cache poisoned");
        let json = serde_json::to_string(&*cache).expect("embedding map serializes");
        std::fs::write(path, json).map_err(|e| PairingError::Cache {
            path: path.clone(),
            message: e.to_string(),
        })
    }
}

/// Rank `candidates` by embedding similarity to `src` and keep the top `k`.
/// Returns `min(k, |candidates|)` entries, most similar first; equal
/// similarities order by ascending snippet id.
pub fn recall_top_k<'a>(
    embedder: &Embedder<'_>,
    src: &CodeSnippet,
    candidates: &'a [CodeSnippet],
    k: usize,
) -> Result<Vec<(&'a CodeSnippet, f64)>, PairingError> {
    if candidates.is_empty() {
        return Err(PairingError::NoCandidates);
    }
    if k == 0 {
        return Err(PairingError::InvalidConfig("k must be >= 1".into()));
    }
    let src_vec = embedder.embed(src)?;
    let mut ranked = Vec::with_capacity(candidates.len());
    for candidate in candidates {
        let vec = embedder.embed(candidate)?;
        ranked.push((candidate, cosine_similarity(&src_vec, &vec)?));
    }
    ranked.sort_by(|(ca, sa), (cb, sb)| {
        sb.total_cmp(sa).then_with(|| ca.snippet_id.cmp(&cb.snippet_id))
    });
    ranked.truncate(k);
    Ok(ranked)
}

fn render_judge_prompt(
    base_template: &PromptTemplate,
    src: &CodeSnippet,
    tgt: &CodeSnippet,
    k: u32,
) -> Result<String, PairingError> {
    let template = judge_template_for_k(base_template, k as u8);
    let prompt = template.render_required(
        &[
            ("SOURCE_LANG", src.language.display_name()),
            ("TARGET_LANG", tgt.language.display_name()),
            ("SOURCE_CODE", &src.source_text),
            ("TARGET_CODE", &tgt.source_text),
        ],
        &["SOURCE_CODE", "TARGET_CODE"],
    )?;
    Ok(prompt)
}

/// Score `tgt`'s relevance to `src` by reading label logits and aggregating
/// them into the softmax-expected label.
pub fn judge_score(
    gateway: &dyn Gateway,
    base_template: &PromptTemplate,
    src: &CodeSnippet,
    tgt: &CodeSnippet,
    cfg: &JudgeConfig,
) -> Result<JudgeDistribution, PairingError> {
    cfg.validate()?;
    if cfg.mode != JudgeMode::Aggregate {
        return Err(PairingError::InvalidConfig(
            "judge_score requires aggregate mode".into(),
        ));
    }
    let prompt = render_judge_prompt(base_template, src, tgt, cfg.k)?;
    let labels: Vec<String> = (1..=cfg.k).map(|n| n.to_string()).collect();
    let logits = gateway.score_labels(&prompt, &labels)?;
    let ordered = logits
        .ordered(&labels)
        .expect("score_labels returns every requested label");
    JudgeDistribution::from_logits(ordered)
}

/// First run of ASCII digits in `text`, parsed as a label. Tolerates
/// prefixes like `"Score: 3"`; rejects text without digits and labels
/// outside 1..=K.
fn parse_label(text: &str, k: u32) -> Result<u32, PairingError> {
    let digits: String = text
        .chars()
        .skip_while(|c| !c.is_ascii_digit())
        .take_while(char::is_ascii_digit)
        .collect();
    if digits.is_empty() {
        return Err(PairingError::UnparsableLabel {
            text: text.to_string(),
        });
    }
    let value: u32 = digits.parse().map_err(|_| PairingError::UnparsableLabel {
        text: text.to_string(),
    })?;
    if !(1..=k).contains(&value) {
        return Err(PairingError::LabelOutOfRange { value, k });
    }
    Ok(value)
}

/// Score relevance by sampling the judge's label as plain text (ablation
/// mode): greedy decode, integer parse, strict range check.
pub fn explicit_score(
    gateway: &dyn Gateway,
    base_template: &PromptTemplate,
    src: &CodeSnippet,
    tgt: &CodeSnippet,
    cfg: &JudgeConfig,
) -> Result<u32, PairingError> {
    cfg.validate()?;
    if cfg.mode != JudgeMode::Explicit {
        return Err(PairingError::InvalidConfig(
            "explicit_score requires explicit mode".into(),
        ));
    }
    let prompt = render_judge_prompt(base_template, src, tgt, cfg.k)?;
    let params = GenerationParams {
        temperature: 0.0,
        max_tokens: 8,
        stop: None,
        samples: 1,
    };
    let completions = gateway.complete(&prompt, &params)?;
    let text = &completions
        .first()
        .ok_or_else(|| GatewayError::MalformedResponse("no completion returned".into()))?
        .text;
    parse_label(text, cfg.k)
}

/// Recall the top candidates for `src`, judge each, and return the best:
/// maximal score, ties broken by higher recall similarity, then ascending
/// snippet id. Judge calls run concurrently; the deterministic tie chain
/// makes the result independent of completion order.
pub fn select_best_pair<'a>(
    embedder: &Embedder<'_>,
    base_template: &PromptTemplate,
    src: &CodeSnippet,
    candidates: &'a [CodeSnippet],
    cfg: &JudgeConfig,
) -> Result<(&'a CodeSnippet, JudgeDistribution), PairingError> {
    cfg.validate()?;
    let recalled = recall_top_k(embedder, src, candidates, cfg.recall_k)?;
    let gateway = embedder.gateway();
    let judged: Vec<Result<(&CodeSnippet, f64, JudgeDistribution), PairingError>> = recalled
        .par_iter()
        .map(|&(candidate, similarity)| {
            judge_score(gateway, base_template, src, candidate, cfg)
                .map(|dist| (candidate, similarity, dist))
        })
        .collect();
    let attempted = judged.len();
    let mut last_error = None;
    let mut best: Option<(&CodeSnippet, f64, JudgeDistribution)> = None;
    for outcome in judged {
        match outcome {
            Err(e) => last_error = Some(e),
            Ok((candidate, similarity, dist)) => {
                let better = match &best {
                    None => true,
                    Some((b_cand, b_sim, b_dist)) => {
                        dist.score > b_dist.score
                            || (dist.score == b_dist.score && similarity > *b_sim)
                            || (dist.score == b_dist.score
                                && similarity == *b_sim
                                && candidate.snippet_id < b_cand.snippet_id)
                    }
                };
                if better {
                    best = Some((candidate, similarity, dist));
                }
            }
        }
    }
    match best {
        Some((candidate, _, dist)) => Ok((candidate, dist)),
        None => Err(PairingError::AllCandidatesFailed {
            attempted,
            last_error: last_error
                .map(|e| e.to_string())
                .unwrap_or_else(|| "no candidates were judged".into()),
        }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{Language, Origin};
    use crate::gateway::{Completion, MockFixtures, MockGateway, TokenLogProbs};
    use std::sync::atomic::{AtomicUsize, Ordering};

    fn snippet(id: &str, text: &str) -> CodeSnippet {
        CodeSnippet::new(id, Language::Python, text, Origin::Mined).unwrap()
    }

    fn judge_base() -> PromptTemplate {
        PromptTemplate::load(std::path::Path::new(concat!(
            env!("CARGO_MANIFEST_DIR"),
            "/../../templates/judge.txt"
        )))
        .unwrap()
    }

    /// Gateway wrapper that counts embed calls, for cache assertions.
    struct CountingGateway {
        inner: MockGateway,
        embeds: AtomicUsize,
    }

    impl Gateway for CountingGateway {
        fn complete(
            &self,
            prompt: &str,
            params: &GenerationParams,
        ) -> Result<Vec<Completion>, GatewayError> {
            self.inner.complete(prompt, params)
        }
        fn score_labels(
            &self,
            prompt: &str,
            labels: &[String],
        ) -> Result<crate::gateway::LabelLogits, GatewayError> {
            self.inner.score_labels(prompt, labels)
        }
        fn token_logprobs(
            &self,
            prompt: &str,
            continuation: &str,
        ) -> Result<TokenLogProbs, GatewayError> {
            self.inner.token_logprobs(prompt, continuation)
        }
        fn embed(&self, text: &str) -> Result<Vec<f64>, GatewayError> {
            self.embeds.fetch_add(1, Ordering::SeqCst);
            self.inner.embed(text)
        }
    }

    #[test]
    fn cosine_similarity_basics() {
        assert_eq!(cosine_similarity(&[1.0, 0.0], &[1.0, 0.0]).unwrap(), 1.0);
        assert_eq!(cosine_similarity(&[1.0, 0.0], &[0.0, 1.0]).unwrap(), 0.0);
        // Scale invariance: [1,2,2] vs [2,4,4] → 18 / (3·6) = 1 exactly.
        assert_eq!(
            cosine_similarity(&[1.0, 2.0, 2.0], &[2.0, 4.0, 4.0]).unwrap(),
            1.0
        );
        assert!(matches!(
            cosine_similarity(&[1.0], &[1.0, 2.0]),
            Err(PairingError::DimensionMismatch { left: 1, right: 2 })
        ));
        assert!(matches!(
            cosine_similarity(&[0.0, 0.0], &[1.0, 0.0]),
            Err(PairingError::ZeroVector)
        ));
    }

    #[test]
    fn judge_distribution_uniform_is_label_mean() {
        let d = JudgeDistribution::from_logits(vec![0.0; 5]).unwrap();
        for p in &d.probs {
            assert!((p - 0.2).abs() < 1e-12);
        }
        assert!((d.score - 3.0).abs() < 1e-12);
    }

    #[test]
    fn judge_distribution_peaked_case() {
        // exp(0)=1 four times, exp(ln 9)=9 → probs k/13; score = (1+2+3+4)/13 + 45/13 = 55/13.
        let d = JudgeDistribution::from_logits(vec![0.0, 0.0, 0.0, 0.0, 9.0_f64.ln()]).unwrap();
        for p in &d.probs[..4] {
            assert!((p - 1.0 / 13.0).abs() < 1e-12);
        }
        assert!((d.probs[4] - 9.0 / 13.0).abs() < 1e-12);
        assert!((d.score - 55.0 / 13.0).abs() < 1e-12);
        assert!((d.score - 4.2308).abs() < 1e-4);
    }

    #[test]
    fn judge_distribution_shift_invariance_and_bounds() {
        let logits = vec![0.3, -1.2, 2.0, 0.0, 1.1];
        let base = JudgeDistribution::from_logits(logits.clone()).unwrap();
        let shifted =
            JudgeDistribution::from_logits(logits.iter().map(|l| l + 100.0).collect()).unwrap();
        assert!((base.score - shifted.score).abs() < 1e-9);
        assert!(base.score >= 1.0 && base.score <= 5.0);
        let total: f64 = base.probs.iter().sum();
        assert!((total - 1.0).abs() < 1e-9);
    }

    #[test]
    fn judge_distribution_monotone_in_top_logit() {
        let mut previous = f64::NEG_INFINITY;
        for bump in 0..20 {
            let logits = vec![0.5, 0.1, 0.0, 0.2, 0.1 * f64::from(bump)];
            let score = JudgeDistribution::from_logits(logits).unwrap().score;
            assert!(score > previous, "bump {bump}: {score} <= {previous}");
            previous = score;
        }
    }

    #[test]
    fn recall_returns_all_when_k_exceeds_candidates() {
        let gw = MockGateway::new(7);
        let embedder = Embedder::new(&gw);
        let src = snippet("src", "print(1)\n");
        let candidates = vec![
            snippet("c1", "print(2)\n"),
            snippet("c2", "print(3)\n"),
            snippet("c3", "print(4)\n"),
        ];
        let ranked = recall_top_k(&embedder, &src, &candidates, 10).unwrap();
        assert_eq!(ranked.len(), 3);
        for pair in ranked.windows(2) {
            assert!(pair[0].1 >= pair[1].1, "not sorted: {ranked:?}");
        }
    }

    #[test]
    fn recall_ranks_exact_duplicate_first() {
        let gw = MockGateway::new(7);
        let embedder = Embedder::new(&gw);
        let src = snippet("src", "print('dup')\n");
        let candidates = vec![
            snippet("other", "import sys\nsys.exit(2)\n"),
            snippet("twin", "print('dup')\n"),
        ];
        let ranked = recall_top_k(&embedder, &src, &candidates, 2).unwrap();
        assert_eq!(ranked[0].0.snippet_id, "twin");
        assert!((ranked[0].1 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn recall_breaks_similarity_ties_by_snippet_id() {
        let mut fixtures = MockFixtures::default();
        fixtures
            .embeddings
            .insert(MockGateway::embed_key("src text"), vec![1.0, 0.0]);
        // Both candidates share one embedding: identical similarity.
        for text in ["cand one", "cand two"] {
            fixtures
                .embeddings
                .insert(MockGateway::embed_key(text), vec![0.6, 0.8]);
        }
        let gw = MockGateway::new(1).with_fixtures(fixtures);
        let embedder = Embedder::new(&gw);
        let src = snippet("src", "src text");
        let candidates = vec![snippet("zeta", "cand two"), snippet("alpha", "cand one")];
        let ranked = recall_top_k(&embedder, &src, &candidates, 2).unwrap();
        assert_eq!(ranked[0].0.snippet_id, "alpha");
        assert_eq!(ranked[1].0.snippet_id, "zeta");
    }

    #[test]
    fn embedder_caches_by_content_hash() {
        let gw = CountingGateway {
            inner: MockGateway::new(3),
            embeds: AtomicUsize::new(0),
        };
        let embedder = Embedder::new(&gw);
        let a = snippet("a", "same body\n");
        let b = snippet("b", "same body\n"); // different id, same content
        embedder.embed(&a).unwrap();
        embedder.embed(&a).unwrap();
        embedder.embed(&b).unwrap();
        assert_eq!(gw.embeds.load(Ordering::SeqCst), 1);
    }

    #[test]
    fn embedder_disk_cache_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("embeddings.json");
        let code = snippet("a", "persisted\n");
        {
            let gw = MockGateway::new(3);
            let embedder = Embedder::with_disk_cache(&gw, &path).unwrap();
            embedder.embed(&code).unwrap();
            embedder.persist().unwrap();
        }
        let gw = CountingGateway {
            inner: MockGateway::new(3),
            embeds: AtomicUsize::new(0),
        };
        let embedder = Embedder::with_disk_cache(&gw, &path).unwrap();
        let vector = embedder.embed(&code).unwrap();
        assert_eq!(gw.embeds.load(Ordering::SeqCst), 0, "disk cache must hit");
        assert!(!vector.is_empty());
    }

    #[test]
    fn judge_score_reads_fixture_logits() {
        let src = snippet("src", "def f():\n    return 1\n");
        let tgt = snippet("tgt", "def g():\n    return 1\n");
        let cfg = JudgeConfig::default();
        let prompt = render_judge_prompt(&judge_base(), &src, &tgt, cfg.k).unwrap();
        let mut fixtures = MockFixtures::default();
        fixtures.label_logits.insert(
            MockGateway::labels_key(&prompt),
            [("1", 0.0), ("2", 0.0), ("3", 0.0), ("4", 0.0), ("5", 9.0_f64.ln())]
                .into_iter()
                .map(|(l, v)| (l.to_string(), v))
                .collect(),
        );
        let gw = MockGateway::new(0).with_fixtures(fixtures);
        let dist = judge_score(&gw, &judge_base(), &src, &tgt, &cfg).unwrap();
        assert!((dist.score - 55.0 / 13.0).abs() < 1e-9);
    }

    #[test]
    fn judge_score_rejects_wrong_mode_and_bad_k() {
        let gw = MockGateway::new(0);
        let src = snippet("s", "a = 1\n");
        let tgt = snippet("t", "b = 2\n");
        let explicit_cfg = JudgeConfig {
            mode: JudgeMode::Explicit,
            ..JudgeConfig::default()
        };
        assert!(matches!(
            judge_score(&gw, &judge_base(), &src, &tgt, &explicit_cfg),
            Err(PairingError::InvalidConfig(_))
        ));
        let bad_k = JudgeConfig {
            k: 12,
            ..JudgeConfig::default()
        };
        assert!(matches!(
            judge_score(&gw, &judge_base(), &src, &tgt, &bad_k),
            Err(PairingError::InvalidConfig(_))
        ));
    }

    #[test]
    fn explicit_score_parses_and_rejects() {
        assert_eq!(parse_label("4", 5).unwrap(), 4);
        assert_eq!(parse_label("Score: 3", 5).unwrap(), 3);
        assert_eq!(parse_label("I rate this 5.", 5).unwrap(), 5);
        assert!(matches!(
            parse_label("great", 5),
            Err(PairingError::UnparsableLabel { .. })
        ));
        assert!(matches!(
            parse_label("7", 5),
            Err(PairingError::LabelOutOfRange { value: 7, k: 5 })
        ));
        assert!(matches!(
            parse_label("0", 5),
            Err(PairingError::LabelOutOfRange { value: 0, k: 5 })
        ));
    }

    #[test]
    fn explicit_score_end_to_end_via_fixture() {
        let src = snippet("src", "x = 1\n");
        let tgt = snippet("tgt", "y = 1\n");
        let cfg = JudgeConfig {
            mode: JudgeMode::Explicit,
            ..JudgeConfig::default()
        };
        let prompt = render_judge_prompt(&judge_base(), &src, &tgt, cfg.k).unwrap();
        let mut fixtures = MockFixtures::default();
        fixtures.completions.insert(
            MockGateway::completion_key(&prompt),
            vec!["Score: 4".to_string()],
        );
        let gw = MockGateway::new(0).with_fixtures(fixtures);
        assert_eq!(explicit_score(&gw, &judge_base(), &src, &tgt, &cfg).unwrap(), 4);
    }

    /// Ten candidates with fixture logits; the designated best is found by
    /// exhaustively judging every candidate here in the test and taking the
    /// argmax by the documented tie chain.
    #[test]
    fn select_best_pair_matches_exhaustive_argmax() {
        let src = snippet("src", "def solve():\n    return 42\n");
        let candidates: Vec<CodeSnippet> = (0..10)
            .map(|i| snippet(&format!("cand{i:02}"), &format!("def solve():\n    return {i}\n")))
            .collect();
        let cfg = JudgeConfig::default();
        let base = judge_base();

        // Designated best: candidate 7 gets a sharply peaked top label.
        let mut fixtures = MockFixtures::default();
        for (i, cand) in candidates.iter().enumerate() {
            let prompt = render_judge_prompt(&base, &src, cand, cfg.k).unwrap();
            let peak = if i == 7 { 4.0 } else { 0.1 * i as f64 };
            fixtures.label_logits.insert(
                MockGateway::labels_key(&prompt),
                (1..=5)
                    .map(|l| (l.to_string(), if l == 5 { peak } else { 0.0 }))
                    .collect(),
            );
        }
        let gw = MockGateway::new(0).with_fixtures(fixtures);
        let embedder = Embedder::new(&gw);

        // Independent argmax: judge every candidate directly.
        let mut expected: Option<(&CodeSnippet, f64)> = None;
        for cand in &candidates {
            let score = judge_score(&gw, &base, &src, cand, &cfg).unwrap().score;
            if expected.is_none_or(|(_, s)| score > s) {
                expected = Some((cand, score));
            }
        }
        let (expected_cand, expected_score) = expected.unwrap();
        assert_eq!(expected_cand.snippet_id, "cand07");

        let (best, dist) = select_best_pair(&embedder, &base, &src, &candidates, &cfg).unwrap();
        assert_eq!(best.snippet_id, expected_cand.snippet_id);
        assert!((dist.score - expected_score).abs() < 1e-12);

        // Input order must not matter when scores are distinct.
        let mut reversed: Vec<CodeSnippet> = candidates.clone();
        reversed.reverse();
        let (best_rev, _) = select_best_pair(&embedder, &base, &src, &reversed, &cfg).unwrap();
        assert_eq!(best_rev.snippet_id, best.snippet_id);
    }

    #[test]
    fn select_best_pair_breaks_score_ties_by_similarity() {
        let src = snippet("src", "source body");
        let near = snippet("near", "near body");
        let far = snippet("far", "far body");
        let cfg = JudgeConfig::default();
        let base = judge_base();

        let mut fixtures = MockFixtures::default();
        // Embeddings: near is closer to src than far.
        fixtures
            .embeddings
            .insert(MockGateway::embed_key("source body"), vec![1.0, 0.0]);
        fixtures
            .embeddings
            .insert(MockGateway::embed_key("near body"), vec![0.9, 0.1]);
        fixtures
            .embeddings
            .insert(MockGateway::embed_key("far body"), vec![0.1, 0.9]);
        // Identical judge logits for both candidates.
        for cand in [&near, &far] {
            let prompt = render_judge_prompt(&base, &src, cand, cfg.k).unwrap();
            fixtures.label_logits.insert(
                MockGateway::labels_key(&prompt),
                (1..=5).map(|l| (l.to_string(), 0.0)).collect(),
            );
        }
        let gw = MockGateway::new(0).with_fixtures(fixtures);
        let embedder = Embedder::new(&gw);
        let candidates = vec![far.clone(), near.clone()];
        let (best, dist) = select_best_pair(&embedder, &base, &src, &candidates, &cfg).unwrap();
        assert_eq!(best.snippet_id, "near");
        assert!((dist.score - 3.0).abs() < 1e-12);
    }

    #[test]
    fn select_best_pair_requires_candidates() {
        let gw = MockGateway::new(0);
        let embedder = Embedder::new(&gw);
        let src = snippet("src", "x = 1\n");
        assert!(matches!(
            select_best_pair(&embedder, &judge_base(), &src, &[], &JudgeConfig::default()),
            Err(PairingError::NoCandidates)
        ));
    }
}
