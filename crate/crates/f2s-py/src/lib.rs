//! Python bindings for the core analyses: style similarity, tree edit
//! distance, judge scoring, consensus choice, and the training losses.
//!
//! The module is a plain `cdylib`; build it with
//! `cargo build -p f2s-py --release`, rename `libf2s_py.so` to `f2s_py.so`
//! somewhere on `sys.path`, and import it:
//!
//!     import f2s_py
//!     f2s_py.judge_score([0.0] * 5)        # 3.0
//!     f2s_py.style_similarity(a, "c", b, "python").cssim
//!
//! `python/smoke_test.py` in the repository root automates exactly that.

use std::fmt::Display;

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

use f2s::corpus::{CodeSnippet, Language, Origin};
use f2s::losses::{LossConfig, LossRequest, ScoreMode};
use f2s::pairing::JudgeDistribution;
use f2s::styledist::IdfTable;

fn value_err(err: impl Display) -> PyErr {
    PyValueError::new_err(err.to_string())
}

fn parse_language(tag: &str) -> PyResult<Language> {
    Language::from_tag(tag).ok_or_else(|| {
        let known: Vec<&str> = Language::ALL.iter().map(|l| l.tag()).collect();
        PyValueError::new_err(format!(
            "unknown language {tag:?}; expected one of {}",
            known.join(", ")
        ))
    })
}

fn snippet(id: &str, code: &str, lang: &str) -> PyResult<CodeSnippet> {
    CodeSnippet::new(id, parse_language(lang)?, code, Origin::Manual).map_err(value_err)
}

/// Component distances and the aggregate similarity of one comparison.
#[pyclass(name = "StyleReport", frozen)]
struct PyStyleReport {
    /// Identifier-naming distance in [0, 1].
    #[pyo3(get)]
    dis_var: f64,
    /// Call-sequence distance in [0, 1].
    #[pyo3(get)]
    dis_api: f64,
    /// Normalized tree-edit distance in [0, 1].
    #[pyo3(get)]
    dis_stru: f64,
    /// 1 minus the mean of the three distances.
    #[pyo3(get)]
    cssim: f64,
}

#[pymethods]
impl PyStyleReport {
    fn __repr__(&self) -> String {
        format!(
            "StyleReport(dis_var={:.6}, dis_api={:.6}, dis_stru={:.6}, cssim={:.6})",
            self.dis_var, self.dis_api, self.dis_stru, self.cssim
        )
    }
}

/// Every score the loss calculator produces for one request.
#[pyclass(name = "LossReport", frozen)]
struct PyLossReport {
    /// Next-token loss of the positive sequence.
    #[pyo3(get)]
    ift: f64,
    /// Scalar score of the positive sequence.
    #[pyo3(get)]
    s_pos: f64,
    /// Scalar scores of the negative sequences, input order.
    #[pyo3(get)]
    s_negs: Vec<f64>,
    #[pyo3(get)]
    l_list: f64,
    #[pyo3(get)]
    l_sty: f64,
    /// Gradient of the list-wise loss over `[s_pos, s_negs...]`.
    #[pyo3(get)]
    grad: Vec<f64>,
}

#[pymethods]
impl PyLossReport {
    fn __repr__(&self) -> String {
        format!(
            "LossReport(ift={:.6}, l_list={:.6}, l_sty={:.6})",
            self.ift, self.l_list, self.l_sty
        )
    }
}

/// Language tags accepted by the other functions, e.g. `["c", "cpp", ...]`.
#[pyfunction]
fn languages() -> Vec<&'static str> {
    Language::ALL.iter().map(|l| l.tag()).collect()
}

/// Compare the style of two code strings, each parsed with its own grammar.
///
/// Uses uniform token weighting, matching the `cssim` CLI subcommand on a
/// bare pair of files. Raises ValueError when a side does not parse.
#[pyfunction]
fn style_similarity(
    a_code: &str,
    a_lang: &str,
    b_code: &str,
    b_lang: &str,
) -> PyResult<PyStyleReport> {
    let a = snippet("a", a_code, a_lang)?;
    let b = snippet("b", b_code, b_lang)?;
    let report = f2s::styledist::cssim(&a, &b, &IdfTable::uniform()).map_err(value_err)?;
    Ok(PyStyleReport {
        dis_var: report.dis_var,
        dis_api: report.dis_api,
        dis_stru: report.dis_stru,
        cssim: report.cssim,
    })
}

/// Edit distance between the syntax trees of two code strings: the minimum
/// number of node relabels, insertions, and deletions.
#[pyfunction]
fn tree_edit_distance(a_code: &str, a_lang: &str, b_code: &str, b_lang: &str) -> PyResult<u64> {
    let a = f2s::styledist::parse(&snippet("a", a_code, a_lang)?).map_err(value_err)?;
    let b = f2s::styledist::parse(&snippet("b", b_code, b_lang)?).map_err(value_err)?;
    f2s::styledist::tree_edit_distance(&a, &b).map_err(value_err)
}

/// Character-level Levenshtein distance divided by the longer length.
#[pyfunction]
fn norm_edit_distance(a: &str, b: &str) -> f64 {
    f2s::styledist::norm_edit_distance(a, b)
}

/// Expected label value under the softmax of per-label logits.
///
/// Index i carries label i + 1, so `[0.0] * 5` scores exactly 3.0.
#[pyfunction]
fn judge_score(logits: Vec<f64>) -> PyResult<f64> {
    Ok(JudgeDistribution::from_logits(logits)
        .map_err(value_err)?
        .score)
}

/// Softmax of per-label logits, in label order.
#[pyfunction]
fn judge_probs(logits: Vec<f64>) -> PyResult<Vec<f64>> {
    Ok(JudgeDistribution::from_logits(logits)
        .map_err(value_err)?
        .probs)
}

/// Index of the candidate most similar to all the others: the first row of
/// the pairwise similarity matrix with the largest off-diagonal sum.
#[pyfunction]
fn consensus_index(similarities: Vec<Vec<f64>>) -> PyResult<usize> {
    if similarities.is_empty() {
        return Err(PyValueError::new_err("similarity matrix is empty"));
    }
    let m = similarities.len();
    if let Some(row) = similarities.iter().find(|row| row.len() != m) {
        return Err(PyValueError::new_err(format!(
            "similarity matrix is not square: {m} rows but a row of length {}",
            row.len()
        )));
    }
    Ok(f2s::styleforge::consensus_index(&similarities))
}

/// List-wise loss of one positive score against the negative scores.
#[pyfunction]
fn list_loss(pos_score: f64, neg_scores: Vec<f64>) -> PyResult<f64> {
    f2s::losses::list_loss(pos_score, &neg_scores).map_err(value_err)
}

/// Gradient of `list_loss` over `[pos_score, neg_scores...]`.
#[pyfunction]
fn list_loss_grad(pos_score: f64, neg_scores: Vec<f64>) -> PyResult<Vec<f64>> {
    f2s::losses::list_loss_grad(pos_score, &neg_scores).map_err(value_err)
}

/// Full loss calculation from token log-probabilities.
///
/// Args:
///     pos_logprobs: per-token log-probabilities of the positive sequence.
///     neg_logprobs: one list per negative sequence.
///     beta: list-wise weight in [0, 1] (default 0.6).
///     score_mode: "lognorm" (default) or "literal" sequence scoring.
#[pyfunction]
#[pyo3(signature = (pos_logprobs, neg_logprobs, beta=None, score_mode=None))]
fn loss_report(
    pos_logprobs: Vec<f64>,
    neg_logprobs: Vec<Vec<f64>>,
    beta: Option<f64>,
    score_mode: Option<&str>,
) -> PyResult<PyLossReport> {
    let score_mode = match score_mode {
        None => None,
        Some("lognorm") => Some(ScoreMode::Lognorm),
        Some("literal") => Some(ScoreMode::Literal),
        Some(other) => {
            return Err(PyValueError::new_err(format!(
                "unknown score_mode {other:?}; expected \"lognorm\" or \"literal\""
            )))
        }
    };
    let request = LossRequest {
        pos_logprobs,
        neg_logprobs,
        beta,
        score_mode,
    };
    let report = f2s::losses::evaluate(&request, &LossConfig::default()).map_err(value_err)?;
    Ok(PyLossReport {
        ift: report.ift,
        s_pos: report.s_pos,
        s_negs: report.s_negs,
        l_list: report.l_list,
        l_sty: report.l_sty,
        grad: report.grad,
    })
}

#[pymodule]
fn f2s_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyStyleReport>()?;
    m.add_class::<PyLossReport>()?;
    m.add_function(wrap_pyfunction!(languages, m)?)?;
    m.add_function(wrap_pyfunction!(style_similarity, m)?)?;
    m.add_function(wrap_pyfunction!(tree_edit_distance, m)?)?;
    m.add_function(wrap_pyfunction!(norm_edit_distance, m)?)?;
    m.add_function(wrap_pyfunction!(judge_score, m)?)?;
    m.add_function(wrap_pyfunction!(judge_probs, m)?)?;
    m.add_function(wrap_pyfunction!(consensus_index, m)?)?;
    m.add_function(wrap_pyfunction!(list_loss, m)?)?;
    m.add_function(wrap_pyfunction!(list_loss_grad, m)?)?;
    m.add_function(wrap_pyfunction!(loss_report, m)?)?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}
