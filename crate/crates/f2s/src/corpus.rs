//! Corpus data model and dataset I/O.
//!
//! A corpus is newline-delimited JSON, one [`Problem`] per line:
//!
//! ```text
//! {"problem_id": str,
//!  "tests": [{"input": base64, "expected_output": base64|null}, ...],
//!  "solutions": [{"snippet_id": str, "language": "c"|"cpp"|"go"|"java"|"python",
//!                 "source_text": str, "origin": "mined"|"generated"|"manual"}, ...],
//!  "meta": object}
//! ```
//!
//! Test I/O is carried as raw bytes (base64 on the wire) so outputs survive
//! arbitrary encodings; the comparison policy lives in the sandbox module.
//! Exports preserve input ordering and are byte-identical across runs.

use std::collections::BTreeSet;
use std::fmt;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::prompt::PromptTemplate;
use crate::util::sha256_hex;

/// Errors raised by corpus loading, validation, and export.
#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("failed to read {path}: {source}")]
    Read {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("failed to write {path}: {source}")]
    Write {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("duplicate problem_id {0:?}")]
    DuplicateProblemId(String),
    #[error("every line of {path} failed validation ({skipped} skipped)")]
    AllLinesInvalid { path: String, skipped: usize },
    #[error("invalid snippet: {0}")]
    InvalidSnippet(String),
    #[error("invalid record: {0}")]
    InvalidRecord(String),
    #[error("serialization failed: {0}")]
    Serialize(#[from] serde_json::Error),
}

/// The five supported programming languages.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Language {
    C,
    Cpp,
    Go,
    Java,
    Python,
}

impl Language {
    /// All supported languages, in tag order.
    pub const ALL: [Language; 5] = [
        Language::C,
        Language::Cpp,
        Language::Go,
        Language::Java,
        Language::Python,
    ];

    /// Lowercase wire tag (`"cpp"`).
    #[must_use]
    pub fn tag(self) -> &'static str {
        match self {
            Language::C => "c",
            Language::Cpp => "cpp",
            Language::Go => "go",
            Language::Java => "java",
            Language::Python => "python",
        }
    }

    /// Human-readable name used inside prompts (`"C++"`).
    #[must_use]
    pub fn display_name(self) -> &'static str {
        match self {
            Language::C => "C",
            Language::Cpp => "C++",
            Language::Go => "Go",
            Language::Java => "Java",
            Language::Python => "Python",
        }
    }

    /// Conventional source-file extension (without the dot).
    #[must_use]
    pub fn file_extension(self) -> &'static str {
        match self {
            Language::C => "c",
            Language::Cpp => "cpp",
            Language::Go => "go",
            Language::Java => "java",
            Language::Python => "py",
        }
    }

    /// Parses a lowercase wire tag.
    #[must_use]
    pub fn from_tag(tag: &str) -> Option<Language> {
        Language::ALL.iter().copied().find(|l| l.tag() == tag)
    }
}

impl fmt::Display for Language {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.display_name())
    }
}

/// Where a snippet came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Origin {
    /// Collected from an existing corpus.
    Mined,
    /// Produced by a model.
    Generated,
    /// Written or edited by hand.
    Manual,
}

/// A single piece of source code in one language.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CodeSnippet {
    pub snippet_id: String,
    pub language: Language,
    pub source_text: String,
    pub origin: Origin,
}

impl CodeSnippet {
    /// Builds a snippet, rejecting empty ids and empty source text.
    pub fn new(
        snippet_id: impl Into<String>,
        language: Language,
        source_text: impl Into<String>,
        origin: Origin,
    ) -> Result<Self, CorpusError> {
        let snippet_id = snippet_id.into();
        let source_text = source_text.into();
        if snippet_id.trim().is_empty() {
            return Err(CorpusError::InvalidSnippet("empty snippet_id".into()));
        }
        if source_text.trim().is_empty() {
            return Err(CorpusError::InvalidSnippet(format!(
                "snippet {snippet_id}: empty source"
            )));
        }
        Ok(Self {
            snippet_id,
            language,
            source_text,
            origin,
        })
    }

    /// Stable content hash over language and source text (hex SHA-256).
    ///
    /// Identical programs share binaries and cached runs through this key, so
    /// it deliberately ignores `snippet_id` and `origin`.
    #[must_use]
    pub fn content_hash(&self) -> String {
        sha256_hex(&[self.language.tag().as_bytes(), self.source_text.as_bytes()])
    }
}

/// One behavioural test: stdin bytes plus optional expected stdout bytes.
///
/// An absent `expected_output` means the ground truth is the source program's
/// own output; the sandbox fills it in on first use.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TestCase {
    #[serde(with = "b64")]
    pub input: Vec<u8>,
    #[serde(with = "b64_opt")]
    pub expected_output: Option<Vec<u8>>,
}

impl TestCase {
    /// A test with input only; expected output to be materialized later.
    #[must_use]
    pub fn from_input(input: impl Into<Vec<u8>>) -> Self {
        Self {
            input: input.into(),
            expected_output: None,
        }
    }

    /// A test with both sides pinned.
    #[must_use]
    pub fn with_expected(input: impl Into<Vec<u8>>, expected: impl Into<Vec<u8>>) -> Self {
        Self {
            input: input.into(),
            expected_output: Some(expected.into()),
        }
    }
}

/// A programming problem: test cases plus solutions in various languages.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Problem {
    pub problem_id: String,
    #[serde(default)]
    pub tests: Vec<TestCase>,
    #[serde(default)]
    pub solutions: Vec<CodeSnippet>,
    #[serde(default)]
    pub meta: serde_json::Map<String, serde_json::Value>,
}

impl Problem {
    /// True when the problem is marked evaluation-only (`meta.eval_only`),
    /// which is the only state allowed to have an empty test list.
    #[must_use]
    pub fn eval_only(&self) -> bool {
        matches!(
            self.meta.get("eval_only"),
            Some(serde_json::Value::Bool(true))
        )
    }

    /// Solutions written in `language`, in corpus order.
    pub fn solutions_in(&self, language: Language) -> impl Iterator<Item = &CodeSnippet> {
        self.solutions
            .iter()
            .filter(move |s| s.language == language)
    }
}

/// Result of checking one problem against the model invariants.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ValidationReport {
    pub problem_id: String,
    pub violations: Vec<String>,
}

impl ValidationReport {
    #[must_use]
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Checks a typed problem against the corpus invariants.
///
/// Report-only: an invalid problem is described, never rejected here.
#[must_use]
pub fn validate_problem(p: &Problem) -> ValidationReport {
    let mut violations = Vec::new();
    if p.problem_id.trim().is_empty() {
        violations.push("empty problem_id".to_string());
    }
    if p.tests.is_empty() && !p.eval_only() {
        violations.push("empty tests (problem not marked eval_only)".to_string());
    }
    let mut seen = BTreeSet::new();
    for (i, s) in p.solutions.iter().enumerate() {
        let label = if s.snippet_id.is_empty() {
            format!("solution #{i}")
        } else {
            format!("solution {}", s.snippet_id)
        };
        if s.snippet_id.trim().is_empty() {
            violations.push(format!("{label}: empty snippet_id"));
        } else if !seen.insert(s.snippet_id.clone()) {
            violations.push(format!("{label}: duplicate snippet_id"));
        }
        if s.source_text.trim().is_empty() {
            violations.push(format!("{label}: empty source"));
        }
    }
    ValidationReport {
        problem_id: p.problem_id.clone(),
        violations,
    }
}

/// Shape/enumeration checks that only exist on the wire (before typing).
///
/// Returns named violations such as `unsupported language 'rust'` that a
/// typed [`Problem`] could never represent.
fn validate_wire_value(v: &serde_json::Value) -> Vec<String> {
    use serde_json::Value;
    let mut violations = Vec::new();
    let Some(obj) = v.as_object() else {
        return vec!["line is not a JSON object".to_string()];
    };
    match obj.get("problem_id") {
        Some(Value::String(_)) => {}
        Some(_) => violations.push("problem_id is not a string".to_string()),
        None => violations.push("missing problem_id".to_string()),
    }
    if let Some(meta) = obj.get("meta") {
        if !meta.is_object() {
            violations.push("meta is not an object".to_string());
        }
    }
    match obj.get("tests") {
        None => {}
        Some(Value::Array(tests)) => {
            for (i, t) in tests.iter().enumerate() {
                let Some(t) = t.as_object() else {
                    violations.push(format!("test #{i}: not an object"));
                    continue;
                };
                match t.get("input") {
                    Some(Value::String(s)) if b64::decode(s).is_ok() => {}
                    Some(Value::String(_)) => {
                        violations.push(format!("test #{i}: input is not valid base64"));
                    }
                    _ => violations.push(format!("test #{i}: missing input")),
                }
                match t.get("expected_output") {
                    None | Some(Value::Null) => {}
                    Some(Value::String(s)) if b64::decode(s).is_ok() => {}
                    Some(_) => {
                        violations
                            .push(format!("test #{i}: expected_output is not base64 or null"));
                    }
                }
            }
        }
        Some(_) => violations.push("tests is not an array".to_string()),
    }
    match obj.get("solutions") {
        None => {}
        Some(Value::Array(solutions)) => {
            for (i, s) in solutions.iter().enumerate() {
                let Some(s) = s.as_object() else {
                    violations.push(format!("solution #{i}: not an object"));
                    continue;
                };
                let label = match s.get("snippet_id") {
                    Some(Value::String(id)) if !id.is_empty() => format!("solution {id}"),
                    _ => format!("solution #{i}"),
                };
                match s.get("language") {
                    Some(Value::String(tag)) if Language::from_tag(tag).is_some() => {}
                    Some(Value::String(tag)) => {
                        violations.push(format!("{label}: unsupported language {tag:?}"));
                    }
                    _ => violations.push(format!("{label}: missing language")),
                }
                match s.get("origin") {
                    Some(Value::String(o)) if ["mined", "generated", "manual"].contains(&o.as_str()) => {}
                    Some(Value::String(o)) => {
                        violations.push(format!("{label}: unknown origin {o:?}"));
                    }
                    _ => violations.push(format!("{label}: missing origin")),
                }
                if !matches!(s.get("source_text"), Some(Value::String(_))) {
                    violations.push(format!("{label}: missing source_text"));
                }
                if !matches!(s.get("snippet_id"), Some(Value::String(_))) {
                    violations.push(format!("{label}: missing snippet_id"));
                }
            }
        }
        Some(_) => violations.push("solutions is not an array".to_string()),
    }
    violations
}

/// One skipped corpus line and why it was skipped.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct LineSkip {
    /// 1-based line number in the source file.
    pub line: usize,
    pub reason: String,
}

/// A loaded corpus: the accepted problems plus a record of skipped lines.
#[derive(Debug, Clone, Default)]
pub struct ProblemSet {
    pub problems: Vec<Problem>,
    pub skipped: Vec<LineSkip>,
}

impl ProblemSet {
    #[must_use]
    pub fn len(&self) -> usize {
        self.problems.len()
    }

    #[must_use]
    pub fn is_empty(&self) -> bool {
        self.problems.is_empty()
    }

    /// Looks a problem up by id.
    #[must_use]
    pub fn get(&self, problem_id: &str) -> Option<&Problem> {
        self.problems.iter().find(|p| p.problem_id == problem_id)
    }
}

/// Loads a JSONL corpus.
///
/// Malformed lines are skipped and recorded with a reason; blank lines are
/// ignored. Fails outright on unreadable files, duplicate `problem_id`s, or
/// when every non-blank line is invalid.
pub fn load_corpus(path: &Path) -> Result<ProblemSet, CorpusError> {
    let file = std::fs::File::open(path).map_err(|source| CorpusError::Read {
        path: path.display().to_string(),
        source,
    })?;
    let reader = BufReader::new(file);
    let mut set = ProblemSet::default();
    let mut seen_ids = BTreeSet::new();
    let mut saw_line = false;
    for (idx, line) in reader.lines().enumerate() {
        let line = line.map_err(|source| CorpusError::Read {
            path: path.display().to_string(),
            source,
        })?;
        let lineno = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        saw_line = true;
        let value: serde_json::Value = match serde_json::from_str(&line) {
            Ok(v) => v,
            Err(e) => {
                set.skipped.push(LineSkip {
                    line: lineno,
                    reason: format!("invalid JSON: {e}"),
                });
                continue;
            }
        };
        let wire_violations = validate_wire_value(&value);
        if !wire_violations.is_empty() {
            set.skipped.push(LineSkip {
                line: lineno,
                reason: wire_violations.join("; "),
            });
            continue;
        }
        let problem: Problem = match serde_json::from_value(value) {
            Ok(p) => p,
            Err(e) => {
                set.skipped.push(LineSkip {
                    line: lineno,
                    reason: format!("schema mismatch: {e}"),
                });
                continue;
            }
        };
        let report = validate_problem(&problem);
        if !report.is_valid() {
            set.skipped.push(LineSkip {
                line: lineno,
                reason: report.violations.join("; "),
            });
            continue;
        }
        if !seen_ids.insert(problem.problem_id.clone()) {
            return Err(CorpusError::DuplicateProblemId(problem.problem_id));
        }
        set.problems.push(problem);
    }
    if saw_line && set.problems.is_empty() {
        return Err(CorpusError::AllLinesInvalid {
            path: path.display().to_string(),
            skipped: set.skipped.len(),
        });
    }
    Ok(set)
}

/// Writes problems as JSONL in the given order. Returns the count written.
pub fn export_corpus(problems: &[Problem], path: &Path) -> Result<usize, CorpusError> {
    write_jsonl(path, problems)
}

/// One instruction-tuning example: a translation prompt and its target code.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IftRecord {
    pub prompt: String,
    pub completion: String,
    pub src_lang: Language,
    pub tgt_lang: Language,
}

impl IftRecord {
    /// Renders the translation prompt for `src` and pairs it with `tgt`'s code.
    ///
    /// The rendered prompt always contains the source code verbatim, and the
    /// two languages must differ.
    pub fn render(
        template: &PromptTemplate,
        src: &CodeSnippet,
        tgt: &CodeSnippet,
    ) -> Result<Self, CorpusError> {
        if src.language == tgt.language {
            return Err(CorpusError::InvalidRecord(format!(
                "source and target are both {}",
                src.language
            )));
        }
        let prompt = template.render(&[
            ("SOURCE_LANG", src.language.display_name()),
            ("TARGET_LANG", tgt.language.display_name()),
            ("SOURCE_CODE", src.source_text.as_str()),
        ]);
        if !prompt.contains(&src.source_text) {
            return Err(CorpusError::InvalidRecord(
                "rendered prompt does not embed the source code; \
                 template lacks {SOURCE_CODE}"
                    .into(),
            ));
        }
        Ok(Self {
            prompt,
            completion: tgt.source_text.clone(),
            src_lang: src.language,
            tgt_lang: tgt.language,
        })
    }
}

/// Writes instruction-tuning records as JSONL. Returns the count written.
pub fn export_ift_dataset(records: &[IftRecord], path: &Path) -> Result<usize, CorpusError> {
    write_jsonl(path, records)
}

/// Reads an instruction-tuning JSONL file back (primarily for round-trips).
pub fn load_ift_dataset(path: &Path) -> Result<Vec<IftRecord>, CorpusError> {
    read_jsonl(path)
}

/// One style-learning example: source, style-consistent positive translation,
/// and style-divergent negative translations with their similarity provenance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StyleRecord {
    pub src: CodeSnippet,
    pub tgt_pos: CodeSnippet,
    pub tgt_negs: Vec<CodeSnippet>,
    pub neg_cssim: Vec<f64>,
}

impl StyleRecord {
    /// Builds a record, enforcing the dataset invariants: at least one
    /// negative, similarities aligned with negatives, and every similarity
    /// strictly below `alpha`.
    pub fn new(
        src: CodeSnippet,
        tgt_pos: CodeSnippet,
        tgt_negs: Vec<CodeSnippet>,
        neg_cssim: Vec<f64>,
        alpha: f64,
    ) -> Result<Self, CorpusError> {
        let record = Self {
            src,
            tgt_pos,
            tgt_negs,
            neg_cssim,
        };
        record.check(alpha)?;
        Ok(record)
    }

    /// Re-validates the invariants (used at construction and at load time).
    pub fn check(&self, alpha: f64) -> Result<(), CorpusError> {
        if self.tgt_negs.is_empty() {
            return Err(CorpusError::InvalidRecord(format!(
                "record for {}: no negatives",
                self.src.snippet_id
            )));
        }
        if self.tgt_negs.len() != self.neg_cssim.len() {
            return Err(CorpusError::InvalidRecord(format!(
                "record for {}: {} negatives but {} similarity values",
                self.src.snippet_id,
                self.tgt_negs.len(),
                self.neg_cssim.len()
            )));
        }
        for (i, &sim) in self.neg_cssim.iter().enumerate() {
            if !sim.is_finite() || !(0.0..=1.0).contains(&sim) {
                return Err(CorpusError::InvalidRecord(format!(
                    "record for {}: neg_cssim[{i}] = {sim} out of [0, 1]",
                    self.src.snippet_id
                )));
            }
            if sim >= alpha {
                return Err(CorpusError::InvalidRecord(format!(
                    "record for {}: neg_cssim[{i}] = {sim} >= alpha {alpha}",
                    self.src.snippet_id
                )));
            }
        }
        Ok(())
    }
}

/// Writes style records as JSONL, re-validating every record against `alpha`.
/// Returns the count written.
pub fn export_style_dataset(
    records: &[StyleRecord],
    path: &Path,
    alpha: f64,
) -> Result<usize, CorpusError> {
    for record in records {
        record.check(alpha)?;
    }
    write_jsonl(path, records)
}

/// Reads a style JSONL file back, enforcing the `alpha` invariant per record.
pub fn load_style_dataset(path: &Path, alpha: f64) -> Result<Vec<StyleRecord>, CorpusError> {
    let records: Vec<StyleRecord> = read_jsonl(path)?;
    for record in &records {
        record.check(alpha)?;
    }
    Ok(records)
}

/// Serializes `items` one JSON object per line, in order.
pub(crate) fn write_jsonl<T: Serialize>(path: &Path, items: &[T]) -> Result<usize, CorpusError> {
    let file = std::fs::File::create(path).map_err(|source| CorpusError::Write {
        path: path.display().to_string(),
        source,
    })?;
    let mut writer = BufWriter::new(file);
    for item in items {
        let line = serde_json::to_string(item)?;
        writer
            .write_all(line.as_bytes())
            .and_then(|()| writer.write_all(b"\n"))
            .map_err(|source| CorpusError::Write {
                path: path.display().to_string(),
                source,
            })?;
    }
    writer.flush().map_err(|source| CorpusError::Write {
        path: path.display().to_string(),
        source,
    })?;
    Ok(items.len())
}

pub(crate) fn read_jsonl<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>, CorpusError> {
    let file = std::fs::File::open(path).map_err(|source| CorpusError::Read {
        path: path.display().to_string(),
        source,
    })?;
    let reader = BufReader::new(file);
    let mut items = Vec::new();
    for line in reader.lines() {
        let line = line.map_err(|source| CorpusError::Read {
            path: path.display().to_string(),
            source,
        })?;
        if line.trim().is_empty() {
            continue;
        }
        items.push(serde_json::from_str(&line)?);
    }
    Ok(items)
}

pub(crate) mod b64 {
    use base64::engine::general_purpose::STANDARD;
    use base64::Engine;
    use serde::{Deserialize, Deserializer, Serializer};

    pub(crate) fn decode(s: &str) -> Result<Vec<u8>, base64::DecodeError> {
        STANDARD.decode(s)
    }

    pub fn serialize<S: Serializer>(bytes: &[u8], ser: S) -> Result<S::Ok, S::Error> {
        ser.serialize_str(&STANDARD.encode(bytes))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(de: D) -> Result<Vec<u8>, D::Error> {
        let s = String::deserialize(de)?;
        decode(&s).map_err(serde::de::Error::custom)
    }
}

mod b64_opt {
    use base64::engine::general_purpose::STANDARD;
    use base64::Engine;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(bytes: &Option<Vec<u8>>, ser: S) -> Result<S::Ok, S::Error> {
        match bytes {
            Some(b) => ser.serialize_some(&STANDARD.encode(b)),
            None => ser.serialize_none(),
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(de: D) -> Result<Option<Vec<u8>>, D::Error> {
        let s: Option<String> = Option::deserialize(de)?;
        s.map(|s| STANDARD.decode(s).map_err(serde::de::Error::custom))
            .transpose()
    }
}
