//! Name extraction from grammar trees.
//!
//! Two name sets feed the style distances:
//!
//! * **variables** — names the snippet *declares*: function parameters,
//!   locals, loop targets, and binding forms (`with … as`, catch clauses,
//!   structured bindings). Function names, type names, attribute writes, and
//!   the discard name `_` are excluded.
//! * **apis** — names the snippet *invokes*: the rightmost identifier of
//!   every call's callee, so `std::minmax`, `fmt.Println`, and `obj.helper.run`
//!   contribute `minmax`, `Println`, and `run`.

use std::collections::BTreeSet;

use tree_sitter::Node;

use crate::corpus::Language;

fn text(node: Node<'_>, src: &[u8]) -> String {
    node.utf8_text(src).unwrap_or_default().to_string()
}

fn add_name(set: &mut BTreeSet<String>, name: String) {
    if !name.is_empty() && name != "_" {
        set.insert(name);
    }
}

/// Rightmost identifier-like token in a callee expression. Handles plain
/// names, attribute/selector chains, and qualified paths uniformly.
fn rightmost_call_name(node: Node<'_>, src: &[u8]) -> Option<String> {
    let mut found = None;
    let mut stack = vec![node];
    while let Some(n) = stack.pop() {
        if matches!(n.kind(), "identifier" | "field_identifier") {
            let candidate = (n.start_byte(), text(n, src));
            match &found {
                Some((byte, _)) if *byte >= candidate.0 => {}
                _ => found = Some(candidate),
            }
        }
        let mut cursor = n.walk();
        stack.extend(n.named_children(&mut cursor));
    }
    found.map(|(_, name)| name).filter(|n| n != "_")
}

/// Walk the whole tree, dispatching on node kind per language.
pub(super) fn collect_names(
    node: Node<'_>,
    src: &[u8],
    language: Language,
    vars: &mut BTreeSet<String>,
    apis: &mut BTreeSet<String>,
) {
    match language {
        Language::Python => python_node(node, src, vars, apis),
        Language::C | Language::Cpp => c_family_node(node, src, vars, apis),
        Language::Java => java_node(node, src, vars, apis),
        Language::Go => go_node(node, src, vars, apis),
    }
    let mut cursor = node.walk();
    for child in node.named_children(&mut cursor) {
        collect_names(child, src, language, vars, apis);
    }
}

// ---------------------------------------------------------------- Python --

/// Assignment/loop targets: plain identifiers and (possibly nested)
/// tuple/list patterns. Attribute and subscript writes are mutations of
/// existing objects, not declarations.
fn python_targets(node: Node<'_>, src: &[u8], vars: &mut BTreeSet<String>) {
    match node.kind() {
        "identifier" => add_name(vars, text(node, src)),
        "tuple_pattern" | "list_pattern" | "pattern_list" | "list_splat_pattern" => {
            let mut cursor = node.walk();
            for child in node.named_children(&mut cursor) {
                python_targets(child, src, vars);
            }
        }
        _ => {}
    }
}

fn python_parameters(params: Node<'_>, src: &[u8], vars: &mut BTreeSet<String>) {
    let mut cursor = params.walk();
    for param in params.named_children(&mut cursor) {
        match param.kind() {
            "identifier" => add_name(vars, text(param, src)),
            "default_parameter" | "typed_default_parameter" => {
                if let Some(name) = param.child_by_field_name("name") {
                    python_targets(name, src, vars);
                }
            }
            // The declared pattern is the first named child; the remaining
            // children are the annotation.
            "typed_parameter" | "list_splat_pattern" | "dictionary_splat_pattern" => {
                if let Some(inner) = param.named_child(0) {
                    python_targets(inner, src, vars);
                }
                if param.kind() != "typed_parameter" && param.named_child_count() == 0 {
                    // Bare *args/**kwargs where the grammar exposes no child.
                    add_name(vars, text(param, src).trim_start_matches('*').to_string());
                }
            }
            _ => {}
        }
    }
}

fn python_node(node: Node<'_>, src: &[u8], vars: &mut BTreeSet<String>, apis: &mut BTreeSet<String>) {
    match node.kind() {
        "assignment" | "augmented_assignment" => {
            if let Some(left) = node.child_by_field_name("left") {
                python_targets(left, src, vars);
            }
        }
        "named_expression" => {
            if let Some(name) = node.child_by_field_name("name") {
                python_targets(name, src, vars);
            }
        }
        "for_statement" | "for_in_clause" => {
            if let Some(left) = node.child_by_field_name("left") {
                python_targets(left, src, vars);
            }
        }
        "function_definition" | "lambda" => {
            if let Some(params) = node.child_by_field_name("parameters") {
                python_parameters(params, src, vars);
            }
        }
        // `with … as h` / `except … as e`: the alias wraps the bound target.
        "as_pattern" => {
            if let Some(alias) = node.child_by_field_name("alias") {
                let mut cursor = alias.walk();
                for child in alias.named_children(&mut cursor) {
                    python_targets(child, src, vars);
                }
            }
        }
        "call" => {
            if let Some(callee) = node.child_by_field_name("function") {
                if let Some(name) = rightmost_call_name(callee, src) {
                    apis.insert(name);
                }
            }
        }
        _ => {}
    }
}

// ------------------------------------------------------------------ C/C++ --

/// Descend through declarator wrappers to the declared identifier(s).
/// Stops at `function_declarator`: that names a function, not a variable,
/// and its parameters are collected by their own `parameter_declaration`
/// nodes.
fn c_declarator(node: Node<'_>, src: &[u8], vars: &mut BTreeSet<String>) {
    match node.kind() {
        "identifier" => add_name(vars, text(node, src)),
        "init_declarator"
        | "pointer_declarator"
        | "array_declarator"
        | "parenthesized_declarator"
        | "attributed_declarator"
        | "reference_declarator" => {
            let inner = node
                .child_by_field_name("declarator")
                .or_else(|| node.named_child(0));
            if let Some(inner) = inner {
                c_declarator(inner, src, vars);
            }
        }
        "structured_binding_declarator" => {
            let mut cursor = node.walk();
            for child in node.named_children(&mut cursor) {
                if child.kind() == "identifier" {
                    add_name(vars, text(child, src));
                }
            }
        }
        "qualified_identifier" => {
            if let Some(name) = node.child_by_field_name("name") {
                c_declarator(name, src, vars);
            }
        }
        _ => {}
    }
}

fn c_family_node(
    node: Node<'_>,
    src: &[u8],
    vars: &mut BTreeSet<String>,
    apis: &mut BTreeSet<String>,
) {
    match node.kind() {
        "declaration" => {
            let mut cursor = node.walk();
            for declarator in node.children_by_field_name("declarator", &mut cursor) {
                c_declarator(declarator, src, vars);
            }
        }
        "parameter_declaration" | "optional_parameter_declaration" => {
            if let Some(declarator) = node.child_by_field_name("declarator") {
                c_declarator(declarator, src, vars);
            }
        }
        "for_range_loop" => {
            if let Some(declarator) = node.child_by_field_name("declarator") {
                c_declarator(declarator, src, vars);
            }
        }
        "call_expression" => {
            if let Some(callee) = node.child_by_field_name("function") {
                if let Some(name) = rightmost_call_name(callee, src) {
                    apis.insert(name);
                }
            }
        }
        _ => {}
    }
}

// ------------------------------------------------------------------- Java --

fn java_node(node: Node<'_>, src: &[u8], vars: &mut BTreeSet<String>, apis: &mut BTreeSet<String>) {
    match node.kind() {
        // Locals, for-init declarations, and class fields (the moral
        // equivalent of globals in single-class programs).
        "variable_declarator" => {
            if let Some(name) = node.child_by_field_name("name") {
                add_name(vars, text(name, src));
            }
        }
        "formal_parameter" => {
            if let Some(name) = node.child_by_field_name("name") {
                add_name(vars, text(name, src));
            }
        }
        "spread_parameter" => {
            let mut cursor = node.walk();
            for child in node.named_children(&mut cursor) {
                if child.kind() == "variable_declarator" {
                    if let Some(name) = child.child_by_field_name("name") {
                        add_name(vars, text(name, src));
                    }
                }
            }
        }
        // `catch (Exception e)` — the identifier child is the binding; type
        // names live inside a `catch_type` node and are skipped.
        "catch_formal_parameter" => {
            let mut cursor = node.walk();
            for child in node.named_children(&mut cursor) {
                if child.kind() == "identifier" {
                    add_name(vars, text(child, src));
                }
            }
        }
        "enhanced_for_statement" => {
            if let Some(name) = node.child_by_field_name("name") {
                add_name(vars, text(name, src));
            }
        }
        "lambda_expression" => {
            if let Some(params) = node.child_by_field_name("parameters") {
                match params.kind() {
                    "identifier" => add_name(vars, text(params, src)),
                    "inferred_parameters" => {
                        let mut cursor = params.walk();
                        for child in params.named_children(&mut cursor) {
                            if child.kind() == "identifier" {
                                add_name(vars, text(child, src));
                            }
                        }
                    }
                    // formal_parameters are handled by their own nodes.
                    _ => {}
                }
            }
        }
        "method_invocation" => {
            if let Some(name) = node.child_by_field_name("name") {
                add_name(apis, text(name, src));
            }
        }
        _ => {}
    }
}

// --------------------------------------------------------------------- Go --

fn go_node(node: Node<'_>, src: &[u8], vars: &mut BTreeSet<String>, apis: &mut BTreeSet<String>) {
    match node.kind() {
        "var_spec" | "const_spec" | "parameter_declaration" | "variadic_parameter_declaration" => {
            let mut cursor = node.walk();
            for name in node.children_by_field_name("name", &mut cursor) {
                if name.kind() == "identifier" {
                    add_name(vars, text(name, src));
                }
            }
        }
        "short_var_declaration" | "range_clause" => {
            if let Some(left) = node.child_by_field_name("left") {
                let mut cursor = left.walk();
                for child in left.named_children(&mut cursor) {
                    if child.kind() == "identifier" {
                        add_name(vars, text(child, src));
                    }
                }
            }
        }
        "call_expression" => {
            if let Some(callee) = node.child_by_field_name("function") {
                if let Some(name) = rightmost_call_name(callee, src) {
                    apis.insert(name);
                }
            }
        }
        _ => {}
    }
}
