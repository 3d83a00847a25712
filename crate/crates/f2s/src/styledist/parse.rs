//! Parsing snippets into style syntax trees.
//!
//! Each supported language ships with an embedded grammar. Parsing yields a
//! [`SyntaxTree`] of *named* node kinds only — punctuation and other
//! anonymous tokens are grammar noise, and comments are dropped entirely so
//! they can never influence a style comparison. Identifier spellings are not
//! stored in the tree; they are collected separately into the variable and
//! call-name sets.

use std::collections::BTreeSet;

use tree_sitter::{Node, Parser};

use super::{extract, StyleError, SyntaxTree};
use crate::corpus::{CodeSnippet, Language};

/// Everything style comparison needs from one snippet: the shape tree plus
/// the two name sets.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CodeAnalysis {
    pub tree: SyntaxTree,
    /// Names the snippet declares: parameters, locals, loop targets, bindings.
    pub variables: BTreeSet<String>,
    /// Function and method names the snippet invokes.
    pub apis: BTreeSet<String>,
}

fn grammar(language: Language) -> tree_sitter::Language {
    match language {
        Language::C => tree_sitter_c::LANGUAGE.into(),
        Language::Cpp => tree_sitter_cpp::LANGUAGE.into(),
        Language::Go => tree_sitter_go::LANGUAGE.into(),
        Language::Java => tree_sitter_java::LANGUAGE.into(),
        Language::Python => tree_sitter_python::LANGUAGE.into(),
    }
}

fn is_comment(kind: &str) -> bool {
    matches!(kind, "comment" | "line_comment" | "block_comment")
}

/// Locate the first syntax error in document order and describe it.
fn first_error(root: Node<'_>, language: Language) -> StyleError {
    let mut cursor = root.walk();
    let mut stack = vec![root];
    let mut found: Option<(usize, usize, String)> = None;
    while let Some(node) = stack.pop() {
        if node.is_error() || node.is_missing() {
            let pos = node.start_position();
            let message = if node.is_missing() {
                format!("missing {}", node.kind())
            } else {
                "unparseable input".to_string()
            };
            let candidate = (pos.row + 1, pos.column + 1, message);
            // Keep the earliest occurrence in document order.
            if found.as_ref().is_none_or(|best| {
                (candidate.0, candidate.1) < (best.0, best.1)
            }) {
                found = Some(candidate);
            }
            continue;
        }
        if node.has_error() {
            // Push children in reverse so document order comes off the stack
            // first; only subtrees with errors need visiting.
            let children: Vec<Node<'_>> = node.children(&mut cursor).collect();
            stack.extend(children.into_iter().rev());
        }
    }
    let (line, col, message) = found.unwrap_or((1, 1, "unparseable input".to_string()));
    StyleError::Parse {
        language,
        line,
        col,
        message,
    }
}

/// Convert a grammar tree into the kinds-only style tree, keeping named
/// nodes and skipping comments. Children of skipped nodes are skipped with
/// them (a comment has no named children worth keeping anyway).
fn style_tree(node: Node<'_>) -> SyntaxTree {
    let mut cursor = node.walk();
    let children = node
        .named_children(&mut cursor)
        .filter(|child| !is_comment(child.kind()))
        .map(style_tree)
        .collect();
    SyntaxTree::node(node.kind(), children)
}

fn parse_source(snippet: &CodeSnippet) -> Result<tree_sitter::Tree, StyleError> {
    let mut parser = Parser::new();
    parser
        .set_language(&grammar(snippet.language))
        .map_err(|e| StyleError::Grammar {
            language: snippet.language,
            message: e.to_string(),
        })?;
    let tree = parser
        .parse(snippet.source_text.as_bytes(), None)
        .ok_or_else(|| StyleError::Grammar {
            language: snippet.language,
            message: "parser returned no tree".to_string(),
        })?;
    if tree.root_node().has_error() {
        return Err(first_error(tree.root_node(), snippet.language));
    }
    Ok(tree)
}

/// Parse a snippet into its style syntax tree.
pub fn parse(snippet: &CodeSnippet) -> Result<SyntaxTree, StyleError> {
    Ok(style_tree(parse_source(snippet)?.root_node()))
}

/// Parse a snippet and extract its style tree, variable names, and call
/// names in one pass.
pub fn analyze(snippet: &CodeSnippet) -> Result<CodeAnalysis, StyleError> {
    let tree = parse_source(snippet)?;
    let root = tree.root_node();
    let mut variables = BTreeSet::new();
    let mut apis = BTreeSet::new();
    extract::collect_names(
        root,
        snippet.source_text.as_bytes(),
        snippet.language,
        &mut variables,
        &mut apis,
    );
    Ok(CodeAnalysis {
        tree: style_tree(root),
        variables,
        apis,
    })
}
