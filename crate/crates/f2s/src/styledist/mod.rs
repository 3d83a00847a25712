//! Code style similarity.
//!
//! Quantifies how close two snippets are in *surface style* — naming and
//! syntactic shape — independently of behaviour. Three distances, each in
//! [0, 1], feed one score:
//!
//! * `dis_var` — variable-naming distance (IDF-weighted nearest-neighbour
//!   edit distance between the snippets' variable-name sets),
//! * `dis_api` — the same construction over invoked call names,
//! * `dis_stru` — tree edit distance between the syntax trees, normalised by
//!   the larger node count.
//!
//! `cssim = 1 − (dis_var + dis_api + dis_stru) / 3`, so identical snippets
//! score exactly 1.0 and the score floors at 0.0.
//!
//! Name sets are plain sets (multiplicity ignored), comments never contribute
//! to any component, and the two snippets may be in different languages —
//! each side is parsed with its own grammar.

mod extract;
mod parse;
mod ted;

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{CodeSnippet, Language};

pub use parse::{analyze, parse, CodeAnalysis};
pub use ted::{
    brute_force_tree_edit_distance, tree_edit_distance, tree_edit_distance_with_budget,
    DEFAULT_NODE_BUDGET,
};

/// Errors from parsing or comparing code style.
#[derive(Debug, Error)]
pub enum StyleError {
    /// The grammar rejected the snippet; positions are 1-based.
    #[error("{language} parse error at line {line}, column {col}: {message}")]
    Parse {
        language: Language,
        line: usize,
        col: usize,
        message: String,
    },
    /// A syntax tree exceeded the node budget for tree edit distance.
    #[error("syntax tree has {nodes} nodes, exceeding the budget of {budget}")]
    TreeTooLarge { nodes: usize, budget: usize },
    /// The embedded grammar could not be loaded.
    #[error("failed to initialise {language} grammar: {message}")]
    Grammar {
        language: Language,
        message: String,
    },
}

/// Ordered tree of syntax-node kinds. Only node kinds are compared —
/// identifier spellings and literal values live in the name sets, not here.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SyntaxTree {
    pub kind: String,
    pub children: Vec<SyntaxTree>,
}

impl SyntaxTree {
    pub fn leaf(kind: impl Into<String>) -> Self {
        Self {
            kind: kind.into(),
            children: Vec::new(),
        }
    }

    pub fn node(kind: impl Into<String>, children: Vec<SyntaxTree>) -> Self {
        Self {
            kind: kind.into(),
            children,
        }
    }

    /// Total number of nodes, computed without recursion so pathological
    /// depth cannot overflow the stack.
    pub fn node_count(&self) -> usize {
        let mut count = 0usize;
        let mut stack = vec![self];
        while let Some(node) = stack.pop() {
            count += 1;
            stack.extend(node.children.iter());
        }
        count
    }
}

/// Levenshtein distance over Unicode scalar values.
fn levenshtein(a: &[char], b: &[char]) -> usize {
    if a.is_empty() {
        return b.len();
    }
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut curr = vec![0usize; b.len() + 1];
    for (i, &ca) in a.iter().enumerate() {
        curr[0] = i + 1;
        for (j, &cb) in b.iter().enumerate() {
            let substitute = prev[j] + usize::from(ca != cb);
            curr[j + 1] = substitute.min(prev[j + 1] + 1).min(curr[j] + 1);
        }
        std::mem::swap(&mut prev, &mut curr);
    }
    prev[b.len()]
}

/// Edit distance divided by the longer length, in [0, 1].
/// Two empty strings are identical: distance 0.
#[must_use]
pub fn norm_edit_distance(a: &str, b: &str) -> f64 {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    let longest = a.len().max(b.len());
    if longest == 0 {
        return 0.0;
    }
    levenshtein(&a, &b) as f64 / longest as f64
}

/// Smoothed inverse document frequencies for identifier names.
///
/// `idf(name) = ln((N + 1) / (df + 1)) + 1`, where `N` is the number of
/// documents the table was built from and `df` counts documents containing
/// the name (an unseen name has `df = 0`). Every weight is strictly positive,
/// and with `N = 0` (the uniform table) every name weighs exactly 1.0.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct IdfTable {
    doc_count: u64,
    df: BTreeMap<String, u64>,
}

impl IdfTable {
    /// Table that weighs every name equally (1.0).
    #[must_use]
    pub fn uniform() -> Self {
        Self::default()
    }

    /// Build from per-document name sets. Each document contributes at most
    /// one count per name.
    pub fn from_documents<I>(documents: I) -> Self
    where
        I: IntoIterator<Item = BTreeSet<String>>,
    {
        let mut doc_count = 0u64;
        let mut df = BTreeMap::new();
        for names in documents {
            doc_count += 1;
            for name in names {
                *df.entry(name).or_insert(0) += 1;
            }
        }
        Self { doc_count, df }
    }

    /// Number of documents the table was built from.
    #[must_use]
    pub fn doc_count(&self) -> u64 {
        self.doc_count
    }

    /// Document frequency recorded for `name` (0 if unseen).
    #[must_use]
    pub fn df(&self, name: &str) -> u64 {
        self.df.get(name).copied().unwrap_or(0)
    }

    /// Smoothed IDF weight for `name`; strictly positive.
    #[must_use]
    pub fn idf(&self, name: &str) -> f64 {
        let df = self.df(name);
        ((self.doc_count + 1) as f64 / (df + 1) as f64).ln() + 1.0
    }
}

/// Build an [`IdfTable`] over a snippet corpus. Each snippet is one document
/// whose name set is its variables and call names combined. Snippets the
/// grammar rejects are skipped rather than failing the whole build.
#[must_use]
pub fn build_idf(corpus: &[CodeSnippet]) -> IdfTable {
    let documents = corpus.iter().filter_map(|snippet| {
        let analysis = analyze(snippet).ok()?;
        let mut names = analysis.variables;
        names.extend(analysis.apis);
        Some(names)
    });
    IdfTable::from_documents(documents)
}

/// One-directional weighted nearest-neighbour distance from `from` to `to`:
/// the weighted mean, over names in `from`, of each name's normalised edit
/// distance to its closest counterpart in `to`.
fn directed_name_distance<W>(from: &BTreeSet<String>, to: &BTreeSet<String>, weight: &W) -> f64
where
    W: Fn(&str) -> f64,
{
    let mut total_weight = 0.0_f64;
    let mut weighted_sum = 0.0_f64;
    for name in from {
        let nearest = to
            .iter()
            .map(|candidate| norm_edit_distance(name, candidate))
            .fold(f64::INFINITY, f64::min);
        let w = weight(name);
        total_weight += w;
        weighted_sum += w * nearest;
    }
    weighted_sum / total_weight
}

/// Symmetric name-set distance under an arbitrary positive weight function.
///
/// Averages the two directed distances. Edge cases: both sets empty → 0.0
/// (nothing differs); exactly one empty → 1.0 (nothing matches).
pub fn dis_names_weighted<W>(n1: &BTreeSet<String>, n2: &BTreeSet<String>, weight: W) -> f64
where
    W: Fn(&str) -> f64,
{
    match (n1.is_empty(), n2.is_empty()) {
        (true, true) => 0.0,
        (true, false) | (false, true) => 1.0,
        (false, false) => {
            0.5 * (directed_name_distance(n1, n2, &weight)
                + directed_name_distance(n2, n1, &weight))
        }
    }
}

/// Symmetric name-set distance weighted by smoothed IDF.
#[must_use]
pub fn dis_names(n1: &BTreeSet<String>, n2: &BTreeSet<String>, idf: &IdfTable) -> f64 {
    dis_names_weighted(n1, n2, |name| idf.idf(name))
}

/// Structural distance: tree edit distance normalised by the larger node
/// count, clamped to [0, 1].
pub fn dis_stru(t1: &SyntaxTree, t2: &SyntaxTree) -> Result<f64, StyleError> {
    let ted = tree_edit_distance(t1, t2)?;
    let scale = t1.node_count().max(t2.node_count());
    Ok((ted as f64 / scale as f64).clamp(0.0, 1.0))
}

/// The three style distances and their combined similarity score.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StyleReport {
    pub dis_var: f64,
    pub dis_api: f64,
    pub dis_stru: f64,
    pub cssim: f64,
}

/// Compare two snippets' style. Each side is parsed with its own language's
/// grammar, so cross-language comparisons are well-defined.
pub fn cssim(a: &CodeSnippet, b: &CodeSnippet, idf: &IdfTable) -> Result<StyleReport, StyleError> {
    let left = analyze(a)?;
    let right = analyze(b)?;
    let dis_var = dis_names(&left.variables, &right.variables, idf);
    let dis_api = dis_names(&left.apis, &right.apis, idf);
    let dis_stru = dis_stru(&left.tree, &right.tree)?;
    Ok(StyleReport {
        dis_var,
        dis_api,
        dis_stru,
        cssim: 1.0 - (dis_var + dis_api + dis_stru) / 3.0,
    })
}
