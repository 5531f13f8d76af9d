//! Index-side and query-side analyzers.
//!
//! The two sides are deliberately different. Canonical names are split on
//! their delimiter, aliases keep their exact surface (lowercased, never
//! stemmed) and additionally emit word 2-gram shingles. Queries are cleaned of
//! code, URLs, stack traces and markup, then tokenized as ordinary prose.

use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::model::is_valid_canonical_name;

/// Shingle width for multi-word aliases and query phrases.
pub const SHINGLE_SIZE: usize = 2;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum AnalysisError {
    #[error("canonical name `{0}` does not match [a-z0-9]+(_[a-z0-9]+)* with at most 5 tokens")]
    CanonicalGrammar(String),
    #[error("alias is empty")]
    EmptyAlias,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FieldKind {
    CanonicalName,
    AliasExact,
    AliasShingle,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AnalyzedField {
    pub field: FieldKind,
    pub tokens: Vec<String>,
}

/// Exact tokens and 2-gram shingles of one alias.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct AliasTerms {
    pub exact: Vec<String>,
    pub shingles: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CleanQuery {
    pub original: String,
    pub cleaned: String,
    pub tokens: Vec<String>,
    pub phrases: Vec<String>,
}

impl CleanQuery {
    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }
}

/// Lowercased words split on every non-alphanumeric character.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|w| !w.is_empty())
        .map(str::to_lowercase)
        .collect()
}

/// Contiguous word 2-grams joined by a single space.
pub fn shingles(tokens: &[String]) -> Vec<String> {
    tokens
        .windows(SHINGLE_SIZE)
        .map(|w| w.join(" "))
        .collect()
}

pub fn analyze_canonical(name: &str) -> Result<Vec<String>, AnalysisError> {
    if !is_valid_canonical_name(name) {
        return Err(AnalysisError::CanonicalGrammar(name.to_string()));
    }
    Ok(name.split('_').map(str::to_string).collect())
}

pub fn analyze_alias(alias: &str) -> Result<AliasTerms, AnalysisError> {
    let exact = tokenize(alias);
    if exact.is_empty() {
        return Err(AnalysisError::EmptyAlias);
    }
    let shingles = shingles(&exact);
    Ok(AliasTerms { exact, shingles })
}

/// All three index-side fields for one belief's name and aliases. Aliases that
/// analyze to nothing (pure punctuation) contribute no tokens.
pub fn analyze_document(canonical_name: &str, aliases: &[String]) -> Result<[AnalyzedField; 3], AnalysisError> {
    let canonical = analyze_canonical(canonical_name)?;
    let mut exact = Vec::new();
    let mut shingle = Vec::new();
    for alias in aliases {
        if let Ok(terms) = analyze_alias(alias) {
            exact.extend(terms.exact);
            shingle.extend(terms.shingles);
        }
    }
    Ok([
        AnalyzedField {
            field: FieldKind::CanonicalName,
            tokens: canonical,
        },
        AnalyzedField {
            field: FieldKind::AliasExact,
            tokens: exact,
        },
        AnalyzedField {
            field: FieldKind::AliasShingle,
            tokens: shingle,
        },
    ])
}

struct Strippers {
    fenced: Regex,
    inline_code: Regex,
    url: Regex,
    markup: Regex,
    stack_line: Regex,
}

fn strippers() -> &'static Strippers {
    static S: OnceLock<Strippers> = OnceLock::new();
    S.get_or_init(|| Strippers {
        // An unterminated fence swallows the rest of the text.
        fenced: Regex::new(r"(?s)```.*?(```|\z)|~~~.*?(~~~|\z)").unwrap(),
        inline_code: Regex::new(r"`[^`\n]*`").unwrap(),
        url: Regex::new(r"(?i)\b(?:https?|ftp|file)://\S+|\bwww\.\S+").unwrap(),
        markup: Regex::new(r"</?[A-Za-z][A-Za-z0-9:-]*(?:\s[^<>]*)?/?>|<!--.*?-->").unwrap(),
        stack_line: Regex::new(
            r#"(?m)^[ \t]*(?:at[ \t]+(?:\S*[./\\]\S*|[^\n(]*\([^\n)]*:\d+(?::\d+)?\)).*|File[ \t]+"[^"\n]*",[ \t]+line[ \t]+\d+.*|Traceback \(most recent call last\):.*|\d+:[ \t]+0x[0-9a-fA-F]+.*)$"#,
        )
        .unwrap(),
    })
}

fn strip_once(text: &str) -> String {
    let s = strippers();
    let text = s.fenced.replace_all(text, " ");
    let text = s.inline_code.replace_all(&text, " ");
    let text = s.stack_line.replace_all(&text, " ");
    let text = s.url.replace_all(&text, " ");
    let text = s.markup.replace_all(&text, " ");
    text.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Removes structured artifacts from a raw query and tokenizes the remaining
/// prose. The stripping runs to a fixpoint so the result is idempotent.
pub fn clean_query(raw: &str) -> CleanQuery {
    // Stack-trace detection is line based, so the first pass must see the
    // original line structure before whitespace is collapsed.
    let mut cleaned = strip_once(raw);
    loop {
        let next = strip_once(&cleaned);
        if next == cleaned {
            break;
        }
        cleaned = next;
    }
    let tokens = tokenize(&cleaned);
    let phrases = shingles(&tokens);
    CleanQuery {
        original: raw.to_string(),
        cleaned,
        tokens,
        phrases,
    }
}
