//! Differential testing and Computational Accuracy.
//!
//! A translation is functionally correct when it produces the same output as
//! its source program on every test input. This module runs both sides,
//! compares normalized outputs, classifies failures, and aggregates pass
//! rates into Computational Accuracy (`CA = passed / total`).

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{ExecStatus, ExecutionResult, Sandbox, SandboxError};
use crate::corpus::{CodeSnippet, TestCase};

/// Output equality rule.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "mode", content = "epsilon")]
pub enum ComparePolicy {
    /// Byte equality after whitespace normalization (the default).
    Exact,
    /// Like `Exact`, but whitespace-separated tokens that both parse as
    /// numbers compare with absolute tolerance instead of textually.
    NumericEpsilon(f64),
}

/// Canonical output form: CRLF→LF, trailing whitespace stripped per line,
/// trailing blank lines dropped, no trailing newline.
#[must_use]
pub fn normalize_output(raw: &[u8]) -> Vec<u8> {
    let mut lines: Vec<&[u8]> = raw
        .split(|&b| b == b'\n')
        .map(|line| {
            let mut end = line.len();
            while end > 0 && matches!(line[end - 1], b' ' | b'\t' | b'\r') {
                end -= 1;
            }
            &line[..end]
        })
        .collect();
    while lines.last().is_some_and(|line| line.is_empty()) {
        lines.pop();
    }
    lines.join(&b'\n')
}

fn tokens_match_numerically(a: &[u8], b: &[u8], epsilon: f64) -> bool {
    let ta: Vec<&[u8]> = a.split(|&c| c == b' ' || c == b'\n').filter(|t| !t.is_empty()).collect();
    let tb: Vec<&[u8]> = b.split(|&c| c == b' ' || c == b'\n').filter(|t| !t.is_empty()).collect();
    if ta.len() != tb.len() {
        return false;
    }
    ta.iter().zip(&tb).all(|(x, y)| {
        let parse = |t: &[u8]| std::str::from_utf8(t).ok().and_then(|s| s.parse::<f64>().ok());
        match (parse(x), parse(y)) {
            (Some(fx), Some(fy)) => (fx - fy).abs() <= epsilon,
            _ => x == y,
        }
    })
}

/// Compare two program outputs under a policy.
#[must_use]
pub fn compare_outputs(a: &[u8], b: &[u8], policy: &ComparePolicy) -> bool {
    let na = normalize_output(a);
    let nb = normalize_output(b);
    match policy {
        ComparePolicy::Exact => na == nb,
        ComparePolicy::NumericEpsilon(eps) => tokens_match_numerically(&na, &nb, *eps),
    }
}

/// Failure taxonomy for one tested pair, assigned on the target side with
/// precedence compile_error > timeout > runtime_error > incorrect_output.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DiffCategory {
    Pass,
    CompileError,
    RuntimeError,
    IncorrectOutput,
    Timeout,
}

/// One input's verdict inside a differential test.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputComparison {
    pub input_id: usize,
    pub src_result: ExecutionResult,
    pub tgt_result: ExecutionResult,
    #[serde(rename = "match")]
    pub matches: bool,
}

/// Full verdict for one (source, target) pair over a test suite.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiffTestReport {
    pub src_snippet_id: String,
    pub tgt_snippet_id: String,
    pub per_input: Vec<InputComparison>,
    pub pass_all: bool,
    pub category: DiffCategory,
}

/// Pass-rate summary over many pair reports.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CaSummary {
    pub total: usize,
    pub passed: usize,
    pub ca: f64,
}

fn classify(per_input: &[InputComparison]) -> DiffCategory {
    let statuses: Vec<ExecStatus> = per_input.iter().map(|c| c.tgt_result.status).collect();
    if statuses.contains(&ExecStatus::CompileError) {
        DiffCategory::CompileError
    } else if statuses.contains(&ExecStatus::Timeout) {
        DiffCategory::Timeout
    } else if statuses
        .iter()
        .any(|s| matches!(s, ExecStatus::RuntimeError | ExecStatus::OutputOverflow))
    {
        DiffCategory::RuntimeError
    } else if per_input.iter().any(|c| !c.matches) {
        DiffCategory::IncorrectOutput
    } else {
        DiffCategory::Pass
    }
}

fn build_report(
    src_id: &str,
    tgt_id: &str,
    per_input: Vec<InputComparison>,
) -> DiffTestReport {
    let pass_all = per_input.iter().all(|c| c.matches);
    let category = classify(&per_input);
    debug_assert_eq!(pass_all, category == DiffCategory::Pass);
    DiffTestReport {
        src_snippet_id: src_id.to_string(),
        tgt_snippet_id: tgt_id.to_string(),
        per_input,
        pass_all,
        category,
    }
}

/// Run source and target on every test input and compare outputs.
///
/// The verdict is about the *target*: a source-side failure means the pair
/// itself is invalid and surfaces as [`SandboxError::PairInvalid`] instead of
/// a report.
pub fn differential_test(
    sandbox: &Sandbox,
    src: &CodeSnippet,
    tgt: &CodeSnippet,
    tests: &[TestCase],
    policy: &ComparePolicy,
) -> Result<DiffTestReport, SandboxError> {
    if tests.is_empty() {
        return Err(SandboxError::EmptyTests);
    }
    // Source side first: it defines ground truth and must be clean.
    let src_results: Vec<ExecutionResult> = tests
        .par_iter()
        .map(|test| sandbox.run_program(src, &test.input))
        .collect::<Result<_, _>>()?;
    for (input_id, result) in src_results.iter().enumerate() {
        if !result.ok() {
            return Err(SandboxError::PairInvalid {
                input_id,
                result: Box::new(result.clone()),
            });
        }
    }
    let tgt_results: Vec<ExecutionResult> = tests
        .par_iter()
        .map(|test| sandbox.run_program(tgt, &test.input))
        .collect::<Result<_, _>>()?;
    let per_input = src_results
        .into_iter()
        .zip(tgt_results)
        .enumerate()
        .map(|(input_id, (src_result, tgt_result))| {
            let matches = tgt_result.ok()
                && compare_outputs(&src_result.stdout, &tgt_result.stdout, policy);
            InputComparison {
                input_id,
                src_result,
                tgt_result,
                matches,
            }
        })
        .collect();
    Ok(build_report(&src.snippet_id, &tgt.snippet_id, per_input))
}

/// Differential test against recorded expected outputs instead of a live
/// source program. Every test must carry `expected_output`; the synthetic
/// "source" results replay those bytes.
pub fn evaluate_against_expected(
    sandbox: &Sandbox,
    reference_id: &str,
    tgt: &CodeSnippet,
    tests: &[TestCase],
    policy: &ComparePolicy,
) -> Result<DiffTestReport, SandboxError> {
    if tests.is_empty() {
        return Err(SandboxError::EmptyTests);
    }
    let expected: Vec<&[u8]> = tests
        .iter()
        .enumerate()
        .map(|(input_id, test)| {
            test.expected_output
                .as_deref()
                .ok_or(SandboxError::MissingExpected { input_id })
        })
        .collect::<Result<_, _>>()?;
    let tgt_results: Vec<ExecutionResult> = tests
        .par_iter()
        .map(|test| sandbox.run_program(tgt, &test.input))
        .collect::<Result<_, _>>()?;
    let per_input = expected
        .into_iter()
        .zip(tgt_results)
        .enumerate()
        .map(|(input_id, (expected_bytes, tgt_result))| {
            let matches =
                tgt_result.ok() && compare_outputs(expected_bytes, &tgt_result.stdout, policy);
            InputComparison {
                input_id,
                src_result: ExecutionResult {
                    status: ExecStatus::Ok,
                    stdout: expected_bytes.to_vec(),
                    stderr: Vec::new(),
                    wall_ms: 0,
                },
                tgt_result,
                matches,
            }
        })
        .collect();
    Ok(build_report(reference_id, &tgt.snippet_id, per_input))
}

/// Computational Accuracy: the fraction of reports that pass on all inputs.
pub fn compute_ca(reports: &[DiffTestReport]) -> Result<CaSummary, SandboxError> {
    if reports.is_empty() {
        return Err(SandboxError::EmptyReports);
    }
    let passed = reports.iter().filter(|r| r.pass_all).count();
    Ok(CaSummary {
        total: reports.len(),
        passed,
        ca: passed as f64 / reports.len() as f64,
    })
}

/// Materialization outcome: the filled tests plus any mismatch warnings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaterializeReport {
    pub tests: Vec<TestCase>,
    pub warnings: Vec<String>,
}

/// Fill each test's `expected_output` from a clean source run.
///
/// The stored bytes are normalized. Idempotent: rerunning on already-filled
/// tests changes nothing. A recorded expected output that disagrees with a
/// fresh run is kept — the recorded value is authoritative — and the
/// disagreement is reported as a warning.
pub fn materialize_expected(
    sandbox: &Sandbox,
    src: &CodeSnippet,
    tests: &[TestCase],
) -> Result<MaterializeReport, SandboxError> {
    let results: Vec<ExecutionResult> = tests
        .par_iter()
        .map(|test| sandbox.run_program(src, &test.input))
        .collect::<Result<_, _>>()?;
    let mut filled = Vec::with_capacity(tests.len());
    let mut warnings = Vec::new();
    for (input_id, (test, result)) in tests.iter().zip(results).enumerate() {
        if !result.ok() {
            return Err(SandboxError::SourceFailed {
                input_id,
                status: result.status,
                result: Box::new(result),
            });
        }
        let fresh = normalize_output(&result.stdout);
        let mut test = test.clone();
        match &test.expected_output {
            Some(recorded) if normalize_output(recorded) != fresh => {
                warnings.push(format!(
                    "input {input_id}: recorded expected output differs from a fresh \
                     source run; keeping the recorded value"
                ));
            }
            Some(_) => {}
            None => test.expected_output = Some(fresh),
        }
        filled.push(test);
    }
    Ok(MaterializeReport {
        tests: filled,
        warnings,
    })
}

/// Run a program twice on every input and report the indices whose
/// normalized outputs differ between runs — a nondeterminism detector.
pub fn flag_instability(
    sandbox: &Sandbox,
    code: &CodeSnippet,
    tests: &[TestCase],
) -> Result<Vec<usize>, SandboxError> {
    let run_all = || -> Result<Vec<ExecutionResult>, SandboxError> {
        tests
            .par_iter()
            .map(|test| sandbox.run_program(code, &test.input))
            .collect()
    };
    let first = run_all()?;
    let second = run_all()?;
    Ok(first
        .iter()
        .zip(&second)
        .enumerate()
        .filter(|(_, (a, b))| {
            a.status != b.status || normalize_output(&a.stdout) != normalize_output(&b.stdout)
        })
        .map(|(i, _)| i)
        .collect())
}
