//! The one tokenizer used everywhere in the pipeline.
//!
//! Word counts drive segmentation bounds, the format gate's length rules, and
//! the lexical metrics, so a single definition is fixed here: Markdown syntax
//! is stripped first, then the text is split on Unicode whitespace. Changing
//! this changes every downstream number; treat it as part of the data format.

/// Characters removed from running text before splitting into words.
///
/// Hyphens and periods are kept so "well-known" and "3.5" stay single words.
const INLINE_SYNTAX: &[char] = &[
    '*', '_', '`', '~', '|', '[', ']', '(', ')', '!', '#', '=', '>',
];

/// Strip Markdown structure from `text`, leaving plain prose.
///
/// Per line: horizontal rules and setext underlines are dropped, leading
/// blockquote/heading/list markers are removed, then inline syntax characters
/// are replaced by spaces so adjacent words never fuse.
pub fn strip_markdown(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    for line in text.lines() {
        let line = strip_line_prefix(line);
        if is_rule_line(line) {
            out.push('\n');
            continue;
        }
        for ch in line.chars() {
            if INLINE_SYNTAX.contains(&ch) {
                out.push(' ');
            } else {
                out.push(ch);
            }
        }
        out.push('\n');
    }
    out
}

/// A line made only of rule characters (`---`, `===`, `***`, `|---|---|`).
fn is_rule_line(line: &str) -> bool {
    let mut seen = false;
    for ch in line.chars() {
        match ch {
            '-' | '=' | '_' | '*' | '~' | '|' | ':' | ' ' | '\t' => {
                if ch != ' ' && ch != '\t' {
                    seen = true;
                }
            }
            _ => return false,
        }
    }
    seen
}

/// Remove leading blockquote, heading, and list markers from one line.
fn strip_line_prefix(line: &str) -> &str {
    let mut rest = line.trim_start();
    // blockquotes may nest
    while let Some(stripped) = rest.strip_prefix('>') {
        rest = stripped.trim_start();
    }
    // ATX heading markers
    let hashes = rest.chars().take_while(|&c| c == '#').count();
    if hashes > 0 && hashes <= 6 {
        match rest[hashes..].chars().next() {
            Some(c) if c.is_whitespace() => return rest[hashes..].trim_start(),
            None => return "",
            _ => {}
        }
    }
    // bullet markers
    for bullet in ["- ", "* ", "+ "] {
        if let Some(stripped) = rest.strip_prefix(bullet) {
            return stripped;
        }
    }
    // ordered-list markers: digits followed by '.' or ')' and a space
    let digits = rest.chars().take_while(|c| c.is_ascii_digit()).count();
    if digits > 0 {
        let tail = &rest[digits..];
        if let Some(stripped) = tail.strip_prefix(". ").or_else(|| tail.strip_prefix(") ")) {
            return stripped;
        }
    }
    rest
}

/// Split `text` into pipeline words.
pub fn words(text: &str) -> Vec<String> {
    strip_markdown(text)
        .split_whitespace()
        .map(str::to_owned)
        .collect()
}

/// Number of pipeline words in `text`.
pub fn word_count(text: &str) -> usize {
    strip_markdown(text).split_whitespace().count()
}

/// Normalize one token for membership tests: lowercase, alphanumerics only.
///
/// Returns `None` when nothing alphanumeric remains (pure punctuation).
pub fn normalize_token(token: &str) -> Option<String> {
    let normalized: String = token
        .chars()
        .filter(|c| c.is_alphanumeric())
        .flat_map(char::to_lowercase)
        .collect();
    if normalized.is_empty() {
        None
    } else {
        Some(normalized)
    }
}

/// Collapse all whitespace runs to single spaces and trim.
pub fn normalize_whitespace(text: &str) -> String {
    text.split_whitespace().collect::<Vec<_>>().join(" ")
}
