//! Style-learning data construction.
//!
//! For each (source, target-language) pair this module:
//!
//! 1. generates `m` candidate translations with a style-preserving prompt,
//! 2. keeps the functional subset T⁺ that passes every test,
//! 3. picks the positive `tgt⁺` by *style consensus* — the candidate whose
//!    summed style similarity to the other members of T⁺ is largest,
//! 4. samples candidate negatives with a plain translation prompt and keeps
//!    up to `n` whose style similarity to `tgt⁺` is strictly below `α`.
//!
//! The result is a [`StyleRecord`]: one positive the model should imitate
//! and negatives it should move away from, with their measured style gaps.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{CodeSnippet, CorpusError, Language, Origin, StyleRecord, TestCase};
use crate::gateway::{extract_code, Gateway, GatewayError, GenerationParams};
use crate::prompt::{PromptError, PromptTemplate};
use crate::sandbox::{
    evaluate_against_expected, ComparePolicy, DiffTestReport, Sandbox, SandboxError,
};
use crate::styledist::{cssim, IdfTable, StyleError};

/// Errors from style-data construction.
#[derive(Debug, Error)]
pub enum StyleForgeError {
    #[error("invalid style-data configuration: {0}")]
    InvalidConfig(String),
    #[error("no usable candidates out of {attempted} generations: {last_error}")]
    NoCandidates { attempted: usize, last_error: String },
    #[error("consensus selection needs at least one candidate")]
    EmptyConsensus,
    #[error(transparent)]
    Gateway(#[from] GatewayError),
    #[error(transparent)]
    Prompt(#[from] PromptError),
    #[error(transparent)]
    Style(#[from] StyleError),
    #[error(transparent)]
    Sandbox(#[from] SandboxError),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
}

/// Knobs for style-data construction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct StyleDataConfig {
    /// Positive candidates generated per pair.
    pub m: usize,
    /// Negatives retained per pair.
    pub n: usize,
    /// Style-gap threshold: negatives must satisfy `cssim < alpha`.
    pub alpha: f64,
    /// Sampling temperature for both generators.
    pub temperature: f64,
}

impl Default for StyleDataConfig {
    fn default() -> Self {
        Self {
            m: 10,
            n: 10,
            alpha: 0.8,
            temperature: 0.7,
        }
    }
}

impl StyleDataConfig {
    pub fn validate(&self) -> Result<(), StyleForgeError> {
        if self.m == 0 {
            return Err(StyleForgeError::InvalidConfig("m must be >= 1".into()));
        }
        if self.n == 0 {
            return Err(StyleForgeError::InvalidConfig("n must be >= 1".into()));
        }
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(StyleForgeError::InvalidConfig(format!(
                "alpha {} must be in (0, 1]",
                self.alpha
            )));
        }
        if !self.temperature.is_finite() || self.temperature < 0.0 {
            return Err(StyleForgeError::InvalidConfig(format!(
                "temperature {} must be finite and >= 0",
                self.temperature
            )));
        }
        Ok(())
    }

    /// Raw negatives drawn before thresholding. Oversampling by
    /// `max(2n, m)` keeps the post-threshold yield near `n`.
    #[must_use]
    pub fn negative_batch(&self) -> usize {
        (2 * self.n).max(self.m)
    }
}

/// Generation output plus diagnostics about dropped samples.
#[derive(Debug, Clone)]
pub struct GenerationOutcome {
    pub candidates: Vec<CodeSnippet>,
    pub warnings: Vec<String>,
}

/// The generated candidates and their functional subset T⁺.
#[derive(Debug, Clone)]
pub struct CandidateSet {
    pub all: Vec<CodeSnippet>,
    pub functional: Vec<CodeSnippet>,
    /// Pass-all reports aligned with `functional`.
    pub functional_reports: Vec<DiffTestReport>,
}

/// Consensus winner with its index into T⁺ (for reporting).
#[derive(Debug, Clone)]
pub struct ConsensusChoice {
    pub index: usize,
    pub snippet: CodeSnippet,
    /// Σ_{j≠i} cssim(i, j) for the winning index.
    pub consensus: f64,
}

/// Retained negatives with diagnostics.
#[derive(Debug, Clone)]
pub struct NegativeOutcome {
    /// (negative, cssim to the positive), ascending by cssim, length ≤ n.
    pub negatives: Vec<(CodeSnippet, f64)>,
    pub warnings: Vec<String>,
    /// Raw generations drawn.
    pub generated: usize,
    /// How many fell below the α threshold before truncation to n.
    pub qualifying: usize,
}

fn generate_batch(
    gateway: &dyn Gateway,
    prompt: &str,
    samples: usize,
    temperature: f64,
    id_prefix: &str,
    language: Language,
) -> Result<GenerationOutcome, StyleForgeError> {
    let params = GenerationParams {
        temperature,
        samples: samples as u32,
        stop: None,
        ..GenerationParams::default()
    };
    let completions = gateway
        .complete(prompt, &params)
        .map_err(|e| StyleForgeError::NoCandidates {
            attempted: samples,
            last_error: e.to_string(),
        })?;
    let mut candidates = Vec::with_capacity(completions.len());
    let mut warnings = Vec::new();
    for (i, completion) in completions.iter().enumerate() {
        let code = extract_code(&completion.text);
        match CodeSnippet::new(
            format!("{id_prefix}{i:02}"),
            language,
            &code,
            Origin::Generated,
        ) {
            Ok(snippet) => candidates.push(snippet),
            Err(e) => warnings.push(format!("sample {i} dropped: {e}")),
        }
    }
    if candidates.is_empty() {
        return Err(StyleForgeError::NoCandidates {
            attempted: samples,
            last_error: warnings
                .last()
                .cloned()
                .unwrap_or_else(|| "gateway returned no completions".into()),
        });
    }
    Ok(GenerationOutcome {
        candidates,
        warnings,
    })
}

/// Generate up to `m` candidate translations with the style-preserving
/// prompt, post-processed (fence-stripped, truncated at the end marker).
pub fn generate_positive_candidates(
    gateway: &dyn Gateway,
    style_template: &PromptTemplate,
    src: &CodeSnippet,
    tgt_lang: Language,
    cfg: &StyleDataConfig,
) -> Result<GenerationOutcome, StyleForgeError> {
    cfg.validate()?;
    let prompt = style_template.render_required(
        &[
            ("SOURCE_LANG", src.language.display_name()),
            ("TARGET_LANG", tgt_lang.display_name()),
            ("SOURCE_CODE", &src.source_text),
        ],
        &["SOURCE_CODE"],
    )?;
    generate_batch(
        gateway,
        &prompt,
        cfg.m,
        cfg.temperature,
        &format!("{}-style-", src.snippet_id),
        tgt_lang,
    )
}

/// Keep the candidates that pass every test against the source's recorded
/// outputs (which must be materialized beforehand).
pub fn filter_functional(
    sandbox: &Sandbox,
    candidates: &[CodeSnippet],
    src: &CodeSnippet,
    tests: &[TestCase],
    policy: &ComparePolicy,
) -> Result<CandidateSet, StyleForgeError> {
    let reports: Vec<DiffTestReport> = candidates
        .par_iter()
        .map(|candidate| {
            evaluate_against_expected(sandbox, &src.snippet_id, candidate, tests, policy)
        })
        .collect::<Result<_, _>>()?;
    let mut functional = Vec::new();
    let mut functional_reports = Vec::new();
    for (candidate, report) in candidates.iter().zip(reports) {
        if report.pass_all {
            functional.push(candidate.clone());
            functional_reports.push(report);
        }
    }
    Ok(CandidateSet {
        all: candidates.to_vec(),
        functional,
        functional_reports,
    })
}

/// Argmax of row sums over an off-diagonal similarity matrix; ties take the
/// lowest index. `matrix[i][j]` is the similarity between candidates i and j;
/// diagonal entries are ignored.
#[must_use]
pub fn consensus_index(matrix: &[Vec<f64>]) -> usize {
    let mut best = 0usize;
    let mut best_sum = f64::NEG_INFINITY;
    for (i, row) in matrix.iter().enumerate() {
        let sum: f64 = row
            .iter()
            .enumerate()
            .filter(|&(j, _)| j != i)
            .map(|(_, v)| v)
            .sum();
        if sum > best_sum {
            best = i;
            best_sum = sum;
        }
    }
    best
}

/// Pick the member of T⁺ with the highest summed style similarity to the
/// rest of T⁺. A singleton is returned as-is; ties break to the lowest
/// candidate index.
pub fn consensus_select(
    tplus: &[CodeSnippet],
    idf: &IdfTable,
) -> Result<ConsensusChoice, StyleForgeError> {
    if tplus.is_empty() {
        return Err(StyleForgeError::EmptyConsensus);
    }
    if tplus.len() == 1 {
        return Ok(ConsensusChoice {
            index: 0,
            snippet: tplus[0].clone(),
            consensus: 0.0,
        });
    }
    let k = tplus.len();
    // Pairwise scores, computed once per unordered pair (cssim is symmetric).
    let pairs: Vec<(usize, usize)> = (0..k)
        .flat_map(|i| (i + 1..k).map(move |j| (i, j)))
        .collect();
    let scored: Vec<(usize, usize, f64)> = pairs
        .par_iter()
        .map(|&(i, j)| {
            let report = cssim(&tplus[i], &tplus[j], idf)?;
            Ok::<_, StyleForgeError>((i, j, report.cssim))
        })
        .collect::<Result<_, _>>()?;
    let mut matrix = vec![vec![0.0f64; k]; k];
    for (i, j, sim) in scored {
        matrix[i][j] = sim;
        matrix[j][i] = sim;
    }
    let index = consensus_index(&matrix);
    let consensus = matrix[index]
        .iter()
        .enumerate()
        .filter(|&(j, _)| j != index)
        .map(|(_, v)| v)
        .sum();
    Ok(ConsensusChoice {
        index,
        snippet: tplus[index].clone(),
        consensus,
    })
}

/// Sample candidate negatives with the plain translation prompt and keep up
/// to `n` whose style similarity to `tgt_pos` is strictly below `α`,
/// lowest-similarity first. Zero qualifying negatives is reported in the
/// outcome, not an error — the pair becomes style-ineligible downstream.
pub fn collect_negatives(
    gateway: &dyn Gateway,
    translation_template: &PromptTemplate,
    src: &CodeSnippet,
    tgt_pos: &CodeSnippet,
    cfg: &StyleDataConfig,
    idf: &IdfTable,
) -> Result<NegativeOutcome, StyleForgeError> {
    cfg.validate()?;
    let prompt = translation_template.render_required(
        &[
            ("SOURCE_LANG", src.language.display_name()),
            ("TARGET_LANG", tgt_pos.language.display_name()),
            ("SOURCE_CODE", &src.source_text),
        ],
        &["SOURCE_CODE"],
    )?;
    let batch = cfg.negative_batch();
    let generation = generate_batch(
        gateway,
        &prompt,
        batch,
        cfg.temperature,
        &format!("{}-neg-", src.snippet_id),
        tgt_pos.language,
    )?;
    let mut warnings = generation.warnings;
    let generated = generation.candidates.len();

    let mut measured: Vec<(CodeSnippet, f64)> = Vec::new();
    for candidate in generation.candidates {
        match cssim(&candidate, tgt_pos, idf) {
            Ok(report) => measured.push((candidate, report.cssim)),
            // Unparseable generations cannot be style-scored; drop them.
            Err(e) => warnings.push(format!(
                "negative {} dropped: {e}",
                candidate.snippet_id
            )),
        }
    }
    let mut qualifying: Vec<(CodeSnippet, f64)> = measured
        .into_iter()
        .filter(|(_, sim)| *sim < cfg.alpha)
        .collect();
    qualifying.sort_by(|(a, sa), (b, sb)| {
        sa.total_cmp(sb).then_with(|| a.snippet_id.cmp(&b.snippet_id))
    });
    let qualifying_count = qualifying.len();
    qualifying.truncate(cfg.n);
    if qualifying.is_empty() {
        warnings.push(format!(
            "no negatives below alpha = {} out of {generated} generations; pair is style-ineligible",
            cfg.alpha
        ));
    } else if qualifying.len() < cfg.n {
        warnings.push(format!(
            "only {} of the targeted {} negatives fell below alpha = {}",
            qualifying.len(),
            cfg.n,
            cfg.alpha
        ));
    }
    Ok(NegativeOutcome {
        negatives: qualifying,
        warnings,
        generated,
        qualifying: qualifying_count,
    })
}

/// Assemble the exportable record, re-checking every dataset invariant.
pub fn build_style_record(
    src: &CodeSnippet,
    tgt_pos: &CodeSnippet,
    negatives: &[(CodeSnippet, f64)],
    alpha: f64,
) -> Result<StyleRecord, StyleForgeError> {
    let (tgt_negs, neg_cssim): (Vec<CodeSnippet>, Vec<f64>) = negatives.iter().cloned().unzip();
    Ok(StyleRecord::new(
        src.clone(),
        tgt_pos.clone(),
        tgt_negs,
        neg_cssim,
        alpha,
    )?)
}
