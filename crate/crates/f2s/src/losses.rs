//! Reference calculators for the training losses.
//!
//! Three quantities are computed from per-token log-probabilities reported
//! by the gateway:
//!
//! * [`ift_loss`] — next-token prediction loss, −Σ log p;
//! * [`list_loss`] — list-wise preference loss over one positive score and a
//!   set of negative scores, −log(e^{S⁺} / Σ_t e^{S_t});
//! * [`style_loss`] — their convex combination β·L_list + (1−β)·L_ift.
//!
//! [`list_loss_grad`] provides the analytic gradient (softmax minus
//! indicator) so numeric consumers can verify against finite differences.
//! Everything is double precision with shifted log-sum-exp stabilization;
//! there is no optimizer or training loop here.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gateway::TokenLogProbs;

/// Errors raised by the loss calculators.
#[derive(Debug, Error)]
pub enum LossError {
    #[error("sequence is empty")]
    EmptySequence,
    #[error("non-finite input: {0}")]
    NonFinite(String),
    #[error("beta {0} out of [0, 1]")]
    BetaOutOfRange(f64),
    #[error("invalid log-probabilities: {0}")]
    InvalidLogProbs(String),
}

/// How a sequence's scalar score S is derived from its token log-probabilities.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScoreMode {
    /// Length-normalized sequence log-probability: (Σ log p)/len.
    ///
    /// The default: the literal reading places a probability in [0, 1]
    /// inside exp(·), which flattens the softmax to near-uniform for
    /// realistic sequence lengths, while the mean log-probability preserves
    /// the intended ranking behavior.
    #[default]
    Lognorm,
    /// Literal sequence probability: exp(Σ log p) ∈ [0, 1].
    Literal,
}

/// Loss hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LossConfig {
    /// Trade-off between the list-wise and next-token terms, in [0, 1].
    pub beta: f64,
    pub score_mode: ScoreMode,
}

impl Default for LossConfig {
    fn default() -> Self {
        Self {
            beta: 0.6,
            score_mode: ScoreMode::default(),
        }
    }
}

impl LossConfig {
    pub fn validate(&self) -> Result<(), LossError> {
        if !self.beta.is_finite() || !(0.0..=1.0).contains(&self.beta) {
            return Err(LossError::BetaOutOfRange(self.beta));
        }
        Ok(())
    }
}

/// A continuation's log-probabilities together with its scalar score.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredSequence {
    pub logprobs: TokenLogProbs,
    pub score: f64,
}

impl ScoredSequence {
    /// Scores a non-empty sequence under `mode`.
    pub fn new(logprobs: TokenLogProbs, mode: ScoreMode) -> Result<Self, LossError> {
        let score = sequence_score(&logprobs, mode)?;
        Ok(Self { logprobs, score })
    }
}

/// Next-token prediction loss: −Σ log p. Non-negative; zero only when every
/// token had probability 1.
pub fn ift_loss(lp: &TokenLogProbs) -> Result<f64, LossError> {
    if lp.is_empty() {
        return Err(LossError::EmptySequence);
    }
    Ok(-lp.sum())
}

/// Scalar sequence score S; see [`ScoreMode`] for the two derivations.
///
/// Literal mode works in log space and only exponentiates at the end, so
/// long sequences underflow gracefully toward 0 instead of erroring.
pub fn sequence_score(lp: &TokenLogProbs, mode: ScoreMode) -> Result<f64, LossError> {
    if lp.is_empty() {
        return Err(LossError::EmptySequence);
    }
    Ok(match mode {
        ScoreMode::Lognorm => lp.sum() / lp.len() as f64,
        ScoreMode::Literal => lp.sum().exp(),
    })
}

fn check_finite(pos_score: f64, neg_scores: &[f64]) -> Result<(), LossError> {
    if !pos_score.is_finite() {
        return Err(LossError::NonFinite(format!("positive score {pos_score}")));
    }
    if let Some(bad) = neg_scores.iter().find(|s| !s.is_finite()) {
        return Err(LossError::NonFinite(format!("negative score {bad}")));
    }
    Ok(())
}

/// List-wise loss −log(e^{S⁺} / Σ_{t ∈ T} e^{S_t}) where T is the negative
/// set plus the positive itself.
///
/// Computed as logsumexp(S) − S⁺ with a max shift, hence non-negative for
/// all finite inputs and exactly ln|T| when every score is equal. With no
/// negatives the loss is 0.
pub fn list_loss(pos_score: f64, neg_scores: &[f64]) -> Result<f64, LossError> {
    check_finite(pos_score, neg_scores)?;
    if neg_scores.is_empty() {
        return Ok(0.0);
    }
    let shift = neg_scores
        .iter()
        .copied()
        .fold(pos_score, f64::max);
    let sum: f64 = std::iter::once(pos_score)
        .chain(neg_scores.iter().copied())
        .map(|s| (s - shift).exp())
        .sum();
    Ok(shift + sum.ln() - pos_score)
}

/// Gradient of [`list_loss`] over `[S⁺, S⁻_1, ..., S⁻_n]`:
/// softmax(S) minus the indicator of the positive. Components sum to 0.
pub fn list_loss_grad(pos_score: f64, neg_scores: &[f64]) -> Result<Vec<f64>, LossError> {
    check_finite(pos_score, neg_scores)?;
    let scores: Vec<f64> = std::iter::once(pos_score)
        .chain(neg_scores.iter().copied())
        .collect();
    let shift = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = scores.iter().map(|s| (s - shift).exp()).collect();
    let total: f64 = exps.iter().sum();
    let mut grad: Vec<f64> = exps.into_iter().map(|e| e / total).collect();
    grad[0] -= 1.0;
    Ok(grad)
}

/// Combined style loss β·L_list + (1−β)·L_ift.
///
/// Exact at the endpoints: β = 1 returns `list_val`, β = 0 returns `ift_val`.
pub fn style_loss(list_val: f64, ift_val: f64, cfg: &LossConfig) -> Result<f64, LossError> {
    cfg.validate()?;
    if !list_val.is_finite() || list_val < 0.0 {
        return Err(LossError::NonFinite(format!("list loss {list_val}")));
    }
    if !ift_val.is_finite() || ift_val < 0.0 {
        return Err(LossError::NonFinite(format!("ift loss {ift_val}")));
    }
    if cfg.beta == 1.0 {
        return Ok(list_val);
    }
    if cfg.beta == 0.0 {
        return Ok(ift_val);
    }
    Ok(cfg.beta * list_val + (1.0 - cfg.beta) * ift_val)
}

/// Input accepted by the `losses` CLI subcommand: raw log-probability
/// vectors for the positive and each negative translation, plus optional
/// hyperparameter overrides.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LossRequest {
    pub pos_logprobs: Vec<f64>,
    #[serde(default)]
    pub neg_logprobs: Vec<Vec<f64>>,
    #[serde(default)]
    pub beta: Option<f64>,
    #[serde(default)]
    pub score_mode: Option<ScoreMode>,
}

/// Output of the `losses` CLI subcommand.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LossReport {
    /// Next-token loss of the positive sequence.
    pub ift: f64,
    /// Scalar score of the positive sequence.
    pub s_pos: f64,
    /// Scalar scores of the negative sequences, input order.
    pub s_negs: Vec<f64>,
    pub l_list: f64,
    pub l_sty: f64,
    /// ∂L_list/∂S over `[S⁺, S⁻_1, ...]`.
    pub grad: Vec<f64>,
}

/// Evaluates every loss quantity for one request.
pub fn evaluate(request: &LossRequest, defaults: &LossConfig) -> Result<LossReport, LossError> {
    let cfg = LossConfig {
        beta: request.beta.unwrap_or(defaults.beta),
        score_mode: request.score_mode.unwrap_or(defaults.score_mode),
    };
    cfg.validate()?;
    let pos = logprobs_from_raw(&request.pos_logprobs)?;
    let negs: Vec<TokenLogProbs> = request
        .neg_logprobs
        .iter()
        .map(|v| logprobs_from_raw(v))
        .collect::<Result<_, _>>()?;
    let ift = ift_loss(&pos)?;
    let s_pos = sequence_score(&pos, cfg.score_mode)?;
    let s_negs: Vec<f64> = negs
        .iter()
        .map(|lp| sequence_score(lp, cfg.score_mode))
        .collect::<Result<_, _>>()?;
    let l_list = list_loss(s_pos, &s_negs)?;
    let grad = list_loss_grad(s_pos, &s_negs)?;
    let l_sty = style_loss(l_list, ift, &cfg)?;
    Ok(LossReport {
        ift,
        s_pos,
        s_negs,
        l_list,
        l_sty,
        grad,
    })
}

/// Wraps a raw log-probability vector in [`TokenLogProbs`] with synthetic
/// token labels (the CLI surface carries numbers only).
fn logprobs_from_raw(raw: &[f64]) -> Result<TokenLogProbs, LossError> {
    let tokens = (0..raw.len()).map(|i| format!("t{i}")).collect();
    TokenLogProbs::new(tokens, raw.to_vec())
        .map_err(|e| LossError::InvalidLogProbs(e.to_string()))
}
