//! Placeholder-based prompt templates.
//!
//! Templates are plain text files containing `{UPPER_SNAKE}` placeholders
//! (e.g. `{SOURCE_LANG}`, `{SOURCE_CODE}`). Rendering is a literal substring
//! replacement: no escaping, no nesting, unknown placeholders are left intact
//! so partially rendered templates can be rendered again later.

use std::collections::BTreeSet;
use std::fmt;
use std::path::Path;

use thiserror::Error;

/// Errors raised while loading or rendering a template.
#[derive(Debug, Error)]
pub enum PromptError {
    #[error("failed to read template {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("template is empty: {0}")]
    Empty(String),
    #[error("placeholder {{{0}}} required by this operation is missing from the template")]
    MissingPlaceholder(String),
}

/// A prompt template with `{UPPER_SNAKE}` placeholders.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptTemplate {
    text: String,
}

impl PromptTemplate {
    /// Wraps literal template text.
    pub fn from_text(text: impl Into<String>) -> Self {
        Self { text: text.into() }
    }

    /// Reads a template from a UTF-8 text file.
    pub fn load(path: &Path) -> Result<Self, PromptError> {
        let text = std::fs::read_to_string(path).map_err(|source| PromptError::Io {
            path: path.display().to_string(),
            source,
        })?;
        if text.trim().is_empty() {
            return Err(PromptError::Empty(path.display().to_string()));
        }
        Ok(Self { text })
    }

    /// Raw template text.
    #[must_use]
    pub fn text(&self) -> &str {
        &self.text
    }

    /// Placeholder names appearing in the template, sorted and deduplicated.
    #[must_use]
    pub fn placeholders(&self) -> BTreeSet<String> {
        let mut names = BTreeSet::new();
        let bytes = self.text.as_bytes();
        let mut i = 0;
        while i < bytes.len() {
            if bytes[i] == b'{' {
                if let Some(end) = self.text[i + 1..].find('}') {
                    let candidate = &self.text[i + 1..i + 1 + end];
                    if is_placeholder_name(candidate) {
                        names.insert(candidate.to_string());
                        i += end + 2;
                        continue;
                    }
                }
            }
            i += 1;
        }
        names
    }

    /// Replaces each `{NAME}` in `vars` with its value.
    ///
    /// Placeholders not mentioned in `vars` are left untouched; values are
    /// inserted literally, so a value containing `{OTHER}` is not re-expanded.
    #[must_use]
    pub fn render(&self, vars: &[(&str, &str)]) -> String {
        // Single pass over the template text: inserted values are never
        // rescanned, which keeps code containing brace tokens intact.
        let mut out = String::with_capacity(self.text.len());
        let mut rest = self.text.as_str();
        'outer: while let Some(open) = rest.find('{') {
            let (before, tail) = rest.split_at(open);
            out.push_str(before);
            for (name, value) in vars {
                let token_len = name.len() + 2;
                if tail.len() >= token_len
                    && tail.as_bytes()[token_len - 1] == b'}'
                    && &tail[1..token_len - 1] == *name
                {
                    out.push_str(value);
                    rest = &tail[token_len..];
                    continue 'outer;
                }
            }
            out.push('{');
            rest = &tail[1..];
        }
        out.push_str(rest);
        out
    }

    /// Renders and additionally checks that every placeholder in `required`
    /// existed in the template, catching miswired template files early.
    pub fn render_required(
        &self,
        vars: &[(&str, &str)],
        required: &[&str],
    ) -> Result<String, PromptError> {
        let present = self.placeholders();
        for name in required {
            if !present.contains(*name) {
                return Err(PromptError::MissingPlaceholder((*name).to_string()));
            }
        }
        Ok(self.render(vars))
    }
}

impl fmt::Display for PromptTemplate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.text)
    }
}

fn is_placeholder_name(s: &str) -> bool {
    !s.is_empty()
        && s.chars()
            .all(|c| c.is_ascii_uppercase() || c.is_ascii_digit() || c == '_')
}

/// Builds the relevance-judge prompt for an arbitrary label count `k`.
///
/// For the default five-point scale the provided template is used verbatim;
/// other scales regenerate the rubric with equally spaced generic level
/// descriptions while keeping the surrounding layout identical.
#[must_use]
pub fn judge_template_for_k(base: &PromptTemplate, k: u8) -> PromptTemplate {
    if k == 5 {
        return base.clone();
    }
    let mut text = String::new();
    text.push_str(&format!(
        "You are given a source code in {{SOURCE_LANG}} and a translated code in \
         {{TARGET_LANG}}. Please evaluate the translation by scoring it on a scale \
         from 1 to {k}, where:\n"
    ));
    for level in 1..=k {
        text.push_str(&format!(
            "\n{level}: The translated code's consistency with the source code is at level \
             {level} on a scale from 1 (significant differences in logic and structure) to \
             {k} (highly consistent in logic and structure, working as intended).\n"
        ));
    }
    text.push_str(
        "\n### {SOURCE_LANG} Code:\n\n{SOURCE_CODE}\n\n### {TARGET_LANG} Code:\n\n\
         {TARGET_CODE}\n\n### Score:\n",
    );
    PromptTemplate::from_text(text)
}
