//! Boilerplate removal: keep the main content region, drop navigation,
//! headers, footers, sidebars, scripts, styles, and forms.

use std::collections::HashSet;
use std::fmt::Write as _;
use std::sync::LazyLock;

use ego_tree::NodeId;
use scraper::{ElementRef, Html, Node, Selector};
use serde::{Deserialize, Serialize};

use crate::text::normalize_whitespace;

use super::{CleanDocument, ContentError, RawDocument};

/// Noise-removal rules: tag names, ARIA roles, and an optional link-density
/// fallback for nav-like clusters the tag rules miss.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CleaningConfig {
    pub strip_tags: Vec<String>,
    pub strip_roles: Vec<String>,
    pub density_fallback: bool,
}

impl Default for CleaningConfig {
    fn default() -> Self {
        CleaningConfig {
            strip_tags: [
                "script", "style", "noscript", "template", "nav", "header", "footer", "aside",
                "form", "iframe", "button", "select", "input", "textarea", "svg", "canvas",
                "dialog", "menu", "link", "meta", "object", "embed",
            ]
            .iter()
            .map(|s| s.to_string())
            .collect(),
            strip_roles: [
                "navigation",
                "banner",
                "contentinfo",
                "complementary",
                "search",
                "form",
                "menu",
                "menubar",
                "dialog",
            ]
            .iter()
            .map(|s| s.to_string())
            .collect(),
            density_fallback: true,
        }
    }
}

static MAIN_CANDIDATES: LazyLock<Vec<Selector>> = LazyLock::new(|| {
    ["main", "[role='main']", "article", "#content", "#main-content", "#bodyContent", "body"]
        .iter()
        .map(|s| Selector::parse(s).expect("static selector"))
        .collect()
});

const VOID_ELEMENTS: &[&str] = &[
    "area", "base", "br", "col", "embed", "hr", "img", "input", "link", "meta", "source",
    "track", "wbr",
];

/// Remove noise regions and return the main content as HTML.
pub fn clean_html(doc: &RawDocument, rules: &CleaningConfig) -> Result<CleanDocument, ContentError> {
    if doc.html.trim().is_empty() {
        return Err(ContentError::MalformedHtml(doc.doc_id.clone()));
    }
    let dom = Html::parse_document(&doc.html);

    let root = MAIN_CANDIDATES
        .iter()
        .find_map(|sel| dom.select(sel).next())
        .ok_or_else(|| ContentError::MalformedHtml(doc.doc_id.clone()))?;

    let mut removed: HashSet<NodeId> = HashSet::new();
    let strip_tags: HashSet<&str> = rules.strip_tags.iter().map(String::as_str).collect();
    let strip_roles: HashSet<&str> = rules.strip_roles.iter().map(String::as_str).collect();

    for node in root.descendants() {
        if let Node::Element(el) = node.value() {
            let tag = el.name();
            let role = el.attr("role").map(str::to_ascii_lowercase);
            if strip_tags.contains(tag)
                || role.as_deref().is_some_and(|r| strip_roles.contains(r))
            {
                removed.insert(node.id());
            }
        }
    }

    if rules.density_fallback {
        for node in root.descendants() {
            if removed.contains(&node.id()) {
                continue;
            }
            let Node::Element(el) = node.value() else { continue };
            if !matches!(el.name(), "div" | "ul" | "ol") {
                continue;
            }
            let stats = link_density(node, &removed);
            if stats.links >= 2
                && stats.total_words > 0
                && stats.total_words < 40
                && stats.link_words * 10 > stats.total_words * 6
            {
                removed.insert(node.id());
            }
        }
    }

    let mut html = String::new();
    let is_body = root.value().name() == "body";
    if is_body {
        for child in root.children() {
            serialize_node(child, &removed, &mut html);
        }
    } else {
        serialize_node(*root, &removed, &mut html);
    }

    let mut surviving_text = String::new();
    collect_text(*root, &removed, &mut surviving_text);
    if normalize_whitespace(&surviving_text).is_empty() {
        return Err(ContentError::EmptyAfterCleaning(doc.doc_id.clone()));
    }

    Ok(CleanDocument {
        doc_id: doc.doc_id.clone(),
        html,
    })
}

struct LinkStats {
    total_words: usize,
    link_words: usize,
    links: usize,
}

fn link_density(node: ego_tree::NodeRef<'_, Node>, removed: &HashSet<NodeId>) -> LinkStats {
    let mut stats = LinkStats { total_words: 0, link_words: 0, links: 0 };
    walk_density(node, removed, false, &mut stats);
    stats
}

fn walk_density(
    node: ego_tree::NodeRef<'_, Node>,
    removed: &HashSet<NodeId>,
    in_link: bool,
    stats: &mut LinkStats,
) {
    if removed.contains(&node.id()) {
        return;
    }
    let mut in_link = in_link;
    match node.value() {
        Node::Element(el) => {
            if el.name() == "a" {
                stats.links += 1;
                in_link = true;
            }
        }
        Node::Text(t) => {
            let words = t.split_whitespace().count();
            stats.total_words += words;
            if in_link {
                stats.link_words += words;
            }
        }
        _ => return,
    }
    for child in node.children() {
        walk_density(child, removed, in_link, stats);
    }
}

fn collect_text(node: ego_tree::NodeRef<'_, Node>, removed: &HashSet<NodeId>, out: &mut String) {
    if removed.contains(&node.id()) {
        return;
    }
    match node.value() {
        Node::Text(t) => {
            out.push_str(t);
            out.push(' ');
        }
        Node::Element(_) | Node::Fragment | Node::Document => {
            for child in node.children() {
                collect_text(child, removed, out);
            }
        }
        _ => {}
    }
}

fn serialize_node(node: ego_tree::NodeRef<'_, Node>, removed: &HashSet<NodeId>, out: &mut String) {
    if removed.contains(&node.id()) {
        return;
    }
    match node.value() {
        Node::Element(el) => {
            let name = el.name();
            out.push('<');
            out.push_str(name);
            for (key, value) in el.attrs() {
                let _ = write!(out, " {key}=\"{}\"", escape_attr(value));
            }
            out.push('>');
            if !VOID_ELEMENTS.contains(&name) {
                for child in node.children() {
                    serialize_node(child, removed, out);
                }
                let _ = write!(out, "</{name}>");
            }
        }
        Node::Text(t) => out.push_str(&escape_text(t)),
        Node::Fragment | Node::Document => {
            for child in node.children() {
                serialize_node(child, removed, out);
            }
        }
        _ => {}
    }
}

fn escape_text(raw: &str) -> String {
    raw.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn escape_attr(raw: &str) -> String {
    escape_text(raw).replace('"', "&quot;")
}

#[allow(dead_code)]
fn element_ref(node: ego_tree::NodeRef<'_, Node>) -> Option<ElementRef<'_>> {
    ElementRef::wrap(node)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn doc(html: &str) -> RawDocument {
        RawDocument {
            doc_id: "test".into(),
            source_uri: "file://test".into(),
            html: html.into(),
            fetched_at: String::new(),
        }
    }

    #[test]
    fn article_survives_nav_and_footer_removal() {
        let html = r#"<html><body>
            <nav><a href="/">Home</a><a href="/about">About</a></nav>
            <article><p>First paragraph.</p><p>Second paragraph.</p><p>Third paragraph.</p></article>
            <footer>Copyright notice.</footer>
        </body></html>"#;
        let cleaned = clean_html(&doc(html), &CleaningConfig::default()).unwrap();
        assert!(cleaned.html.contains("First paragraph."));
        assert!(cleaned.html.contains("Second paragraph."));
        assert!(cleaned.html.contains("Third paragraph."));
        assert!(!cleaned.html.contains("Home"));
        assert!(!cleaned.html.contains("Copyright"));
        assert_eq!(cleaned.html.matches("<p>").count(), 3);
    }

    #[test]
    fn cookie_banner_only_page_is_empty_after_cleaning() {
        let html = "<html><body><footer><div>We use cookies. Accept?</div></footer></body></html>";
        let err = clean_html(&doc(html), &CleaningConfig::default()).unwrap_err();
        assert!(matches!(err, ContentError::EmptyAfterCleaning(_)));
    }

    #[test]
    fn blank_input_is_malformed() {
        let err = clean_html(&doc("   "), &CleaningConfig::default()).unwrap_err();
        assert!(matches!(err, ContentError::MalformedHtml(_)));
    }

    #[test]
    fn scripts_styles_and_roles_are_stripped() {
        let html = r#"<html><body><main>
            <script>alert(1)</script>
            <style>p { color: red }</style>
            <div role="navigation"><a href="/a">A</a></div>
            <p>Real content stays.</p>
        </main></body></html>"#;
        let cleaned = clean_html(&doc(html), &CleaningConfig::default()).unwrap();
        assert!(!cleaned.html.contains("alert"));
        assert!(!cleaned.html.contains("color"));
        assert!(!cleaned.html.contains("href=\"/a\""));
        assert!(cleaned.html.contains("Real content stays."));
    }

    #[test]
    fn link_dense_clusters_fall_to_the_density_heuristic() {
        let html = r#"<html><body><main>
            <div><a href="/1">Politics</a> <a href="/2">Sports</a> <a href="/3">Weather</a></div>
            <p>A real paragraph with enough prose to be obviously content rather than navigation.</p>
        </main></body></html>"#;
        let cleaned = clean_html(&doc(html), &CleaningConfig::default()).unwrap();
        assert!(!cleaned.html.contains("Politics"));
        assert!(cleaned.html.contains("real paragraph"));
    }

    #[test]
    fn element_order_is_preserved() {
        let html = "<html><body><main><p>alpha</p><ul><li>beta</li></ul><p>gamma</p></main></body></html>";
        let cleaned = clean_html(&doc(html), &CleaningConfig::default()).unwrap();
        let a = cleaned.html.find("alpha").unwrap();
        let b = cleaned.html.find("beta").unwrap();
        let c = cleaned.html.find("gamma").unwrap();
        assert!(a < b && b < c);
    }

    #[test]
    fn body_fallback_keeps_plain_pages() {
        let html = "<html><body><p>Loose paragraph one.</p><p>Loose paragraph two.</p></body></html>";
        let cleaned = clean_html(&doc(html), &CleaningConfig::default()).unwrap();
        assert!(cleaned.html.contains("Loose paragraph one."));
        assert!(!cleaned.html.contains("<body"));
    }
}
