//! Table-of-contents derivation from the Markdown heading index.

use super::{MarkdownDoc, Toc, TocEntry};

/// Build the TOC tree. Each entry's span runs from its heading line to the
/// next heading of equal-or-lower level (or end of document). Text before the
/// first heading becomes a synthetic level-0 entry; a document with no
/// headings yields a single synthetic root spanning the whole body.
pub fn derive_toc(doc: &MarkdownDoc) -> Toc {
    let len = doc.markdown.len();
    if doc.headings.is_empty() {
        return Toc {
            entries: vec![TocEntry {
                title: String::new(),
                level: 0,
                span: (0, len),
                children: Vec::new(),
            }],
        };
    }

    let mut entries: Vec<TocEntry> = Vec::new();

    let first_offset = doc.headings[0].byte_offset;
    if !doc.markdown[..first_offset].trim().is_empty() {
        entries.push(TocEntry {
            title: String::new(),
            level: 0,
            span: (0, first_offset),
            children: Vec::new(),
        });
    }

    // span end: next heading at equal-or-lower level, else end of document
    let spans: Vec<(usize, usize)> = doc
        .headings
        .iter()
        .enumerate()
        .map(|(i, h)| {
            let end = doc.headings[i + 1..]
                .iter()
                .find(|next| next.level <= h.level)
                .map(|next| next.byte_offset)
                .unwrap_or(len);
            (h.byte_offset, end)
        })
        .collect();

    // stack of (level, path of child indices) locating the insertion point
    let mut stack: Vec<(u8, usize)> = Vec::new(); // (level, index within parent)
    fn entry_at<'a>(entries: &'a mut Vec<TocEntry>, stack: &[(u8, usize)]) -> &'a mut Vec<TocEntry> {
        let mut current = entries;
        for &(_, idx) in stack {
            current = &mut current[idx].children;
        }
        current
    }

    for (heading, span) in doc.headings.iter().zip(spans) {
        while stack.last().is_some_and(|&(level, _)| level >= heading.level) {
            stack.pop();
        }
        let siblings = entry_at(&mut entries, &stack);
        siblings.push(TocEntry {
            title: heading.title.clone(),
            level: heading.level,
            span,
            children: Vec::new(),
        });
        stack.push((heading.level, siblings.len() - 1));
    }

    Toc { entries }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::content_prep::{to_markdown, CleanDocument};

    fn doc_from_html(html: &str) -> MarkdownDoc {
        to_markdown(&CleanDocument { doc_id: "t".into(), html: html.into() })
    }

    fn titles(entries: &[TocEntry]) -> Vec<&str> {
        entries.iter().map(|e| e.title.as_str()).collect()
    }

    #[test]
    fn nesting_follows_heading_levels() {
        // headings [(1,A),(2,B),(2,C),(1,D)] -> A{B,C}, D
        let doc = doc_from_html(
            "<h1>A</h1><p>a</p><h2>B</h2><p>b</p><h2>C</h2><p>c</p><h1>D</h1><p>d</p>",
        );
        let toc = derive_toc(&doc);
        assert_eq!(titles(&toc.entries), vec!["A", "D"]);
        assert_eq!(titles(&toc.entries[0].children), vec!["B", "C"]);
        assert!(toc.entries[1].children.is_empty());
    }

    #[test]
    fn no_headings_yields_single_root_spanning_body() {
        let doc = doc_from_html("<p>just text</p><p>more text</p>");
        let toc = derive_toc(&doc);
        assert_eq!(toc.entries.len(), 1);
        assert_eq!(toc.entries[0].span, (0, doc.markdown.len()));
        assert_eq!(toc.entries[0].level, 0);
    }

    #[test]
    fn downward_level_jump_promotes_to_top_level() {
        // headings [(2,B),(1,A)] -> B alongside A
        let doc = doc_from_html("<h2>B</h2><p>b</p><h1>A</h1><p>a</p>");
        let toc = derive_toc(&doc);
        assert_eq!(titles(&toc.entries), vec!["B", "A"]);
    }

    #[test]
    fn preamble_text_gets_a_synthetic_entry() {
        let doc = doc_from_html("<p>intro before any heading</p><h1>A</h1><p>a</p>");
        let toc = derive_toc(&doc);
        assert_eq!(toc.entries.len(), 2);
        assert_eq!(toc.entries[0].title, "");
        assert_eq!(toc.entries[0].level, 0);
        assert_eq!(toc.entries[1].title, "A");
        assert_eq!(toc.entries[0].span.1, toc.entries[1].span.0);
    }

    #[test]
    fn sibling_spans_are_disjoint_and_ordered_and_children_nest() {
        let doc = doc_from_html(
            "<h1>A</h1><p>a</p><h2>B</h2><p>b</p><h3>B1</h3><p>b1</p><h2>C</h2><p>c</p><h1>D</h1><p>d</p>",
        );
        let toc = derive_toc(&doc);
        fn check(entries: &[TocEntry]) {
            for pair in entries.windows(2) {
                assert!(pair[0].span.1 <= pair[1].span.0, "siblings overlap");
            }
            for entry in entries {
                for child in &entry.children {
                    assert!(child.span.0 >= entry.span.0 && child.span.1 <= entry.span.1);
                }
                check(&entry.children);
            }
        }
        check(&toc.entries);
    }

    #[test]
    fn top_level_spans_cover_the_whole_body() {
        let doc = doc_from_html("<p>intro</p><h1>A</h1><p>a</p><h1>B</h1><p>b</p>");
        let toc = derive_toc(&doc);
        assert_eq!(toc.entries.first().unwrap().span.0, 0);
        assert_eq!(toc.entries.last().unwrap().span.1, doc.markdown.len());
        for pair in toc.entries.windows(2) {
            assert_eq!(pair[0].span.1, pair[1].span.0);
        }
    }
}
