//! Cleaned HTML → Markdown, preserving headings, lists, tables, links, and
//! image references. Unknown elements degrade to their text content.

use scraper::{Html, Node};

use crate::text::normalize_whitespace;

use super::{CleanDocument, Heading, MarkdownDoc};

/// Render a cleaned document as Markdown and index its headings.
pub fn to_markdown(doc: &CleanDocument) -> MarkdownDoc {
    let dom = Html::parse_fragment(&doc.html);
    let mut writer = Writer::default();
    for child in dom.tree.root().children() {
        writer.block(child);
    }
    let markdown = writer.out.trim_end().to_owned() + "\n";
    MarkdownDoc {
        doc_id: doc.doc_id.clone(),
        markdown,
        headings: writer.headings,
    }
}

#[derive(Default)]
struct Writer {
    out: String,
    headings: Vec<Heading>,
}

impl Writer {
    /// Make sure the next block starts on a fresh line with one blank line
    /// before it.
    fn break_block(&mut self) {
        while self.out.ends_with(' ') || self.out.ends_with('\t') {
            self.out.pop();
        }
        if self.out.is_empty() {
            return;
        }
        while !self.out.ends_with("\n\n") {
            self.out.push('\n');
        }
    }

    fn block(&mut self, node: ego_tree::NodeRef<'_, Node>) {
        match node.value() {
            Node::Text(t) => {
                // stray text between blocks becomes a paragraph of its own
                let collapsed = normalize_whitespace(t);
                if !collapsed.is_empty() {
                    self.break_block();
                    self.out.push_str(&collapsed);
                }
            }
            Node::Element(el) => {
                let name = el.name().to_ascii_lowercase();
                match name.as_str() {
                    "h1" | "h2" | "h3" | "h4" | "h5" | "h6" => {
                        let level = name.as_bytes()[1] - b'0';
                        self.heading(node, level);
                    }
                    "p" => self.paragraph(node),
                    "ul" => self.list(node, false, 0),
                    "ol" => self.list(node, true, 0),
                    "table" => self.table(node),
                    "blockquote" => self.blockquote(node),
                    "pre" => self.code_block(node),
                    "hr" => {
                        self.break_block();
                        self.out.push_str("---");
                    }
                    "br" => self.out.push('\n'),
                    // block containers are transparent
                    _ => {
                        if is_inline(&name) {
                            self.paragraph(node);
                        } else {
                            for child in node.children() {
                                self.block(child);
                            }
                        }
                    }
                }
            }
            Node::Fragment | Node::Document => {
                for child in node.children() {
                    self.block(child);
                }
            }
            _ => {}
        }
    }

    fn heading(&mut self, node: ego_tree::NodeRef<'_, Node>, level: u8) {
        let title = normalize_whitespace(&render_inline(node));
        if title.is_empty() {
            return;
        }
        self.break_block();
        let offset = self.out.len();
        self.out.push_str(&"#".repeat(level as usize));
        self.out.push(' ');
        self.out.push_str(&title);
        self.headings.push(Heading { level, title, byte_offset: offset });
    }

    fn paragraph(&mut self, node: ego_tree::NodeRef<'_, Node>) {
        let text = render_inline(node);
        let text = text.trim();
        if text.is_empty() {
            return;
        }
        self.break_block();
        self.out.push_str(text);
    }

    fn list(&mut self, node: ego_tree::NodeRef<'_, Node>, ordered: bool, depth: usize) {
        if depth == 0 {
            self.break_block();
        }
        let mut index = 1usize;
        for child in node.children() {
            let Node::Element(el) = child.value() else { continue };
            if el.name() != "li" {
                continue;
            }
            let marker = if ordered { format!("{index}. ") } else { "- ".to_owned() };
            index += 1;
            let item_text = normalize_whitespace(&render_inline_excluding_lists(child));
            if !self.out.is_empty() && !self.out.ends_with('\n') {
                self.out.push('\n');
            }
            self.out.push_str(&"  ".repeat(depth));
            self.out.push_str(&marker);
            self.out.push_str(&item_text);
            // nested lists render as indented sub-items
            for grandchild in child.children() {
                if let Node::Element(el) = grandchild.value() {
                    match el.name() {
                        "ul" => self.list(grandchild, false, depth + 1),
                        "ol" => self.list(grandchild, true, depth + 1),
                        _ => {}
                    }
                }
            }
        }
    }

    fn table(&mut self, node: ego_tree::NodeRef<'_, Node>) {
        let mut rows: Vec<Vec<String>> = Vec::new();
        let mut header: Option<Vec<String>> = None;
        collect_rows(node, &mut rows, &mut header);
        if rows.is_empty() && header.is_none() {
            return;
        }
        let width = header
            .iter()
            .chain(rows.iter())
            .map(Vec::len)
            .max()
            .unwrap_or(0);
        if width == 0 {
            return;
        }
        let render_row = |cells: &[String]| -> String {
            let mut padded: Vec<String> = cells.to_vec();
            padded.resize(width, String::new());
            format!("| {} |", padded.join(" | "))
        };
        self.break_block();
        let header_cells = header.unwrap_or_else(|| vec![String::new(); width]);
        self.out.push_str(&render_row(&header_cells));
        self.out.push('\n');
        self.out.push_str(&format!("|{}", " --- |".repeat(width)));
        for row in rows {
            self.out.push('\n');
            self.out.push_str(&render_row(&row));
        }
    }

    fn blockquote(&mut self, node: ego_tree::NodeRef<'_, Node>) {
        let mut inner = Writer::default();
        for child in node.children() {
            inner.block(child);
        }
        let quoted: Vec<String> = inner
            .out
            .trim()
            .lines()
            .map(|l| format!("> {l}").trim_end().to_owned())
            .collect();
        if quoted.is_empty() {
            return;
        }
        self.break_block();
        self.out.push_str(&quoted.join("\n"));
    }

    fn code_block(&mut self, node: ego_tree::NodeRef<'_, Node>) {
        let mut raw = String::new();
        collect_raw_text(node, &mut raw);
        let raw = raw.trim_matches('\n');
        if raw.trim().is_empty() {
            return;
        }
        self.break_block();
        self.out.push_str("```\n");
        self.out.push_str(raw);
        self.out.push_str("\n```");
    }
}

fn is_inline(name: &str) -> bool {
    matches!(
        name,
        "a" | "b" | "strong" | "i" | "em" | "code" | "span" | "img" | "sub" | "sup" | "small"
            | "u" | "abbr" | "cite" | "q" | "mark" | "time"
    )
}

/// Render the inline content of a node: emphasis, links, images, code.
fn render_inline(node: ego_tree::NodeRef<'_, Node>) -> String {
    let mut out = String::new();
    render_inline_into(node, &mut out, true);
    out
}

fn render_inline_excluding_lists(node: ego_tree::NodeRef<'_, Node>) -> String {
    let mut out = String::new();
    for child in node.children() {
        if let Node::Element(el) = child.value() {
            if matches!(el.name(), "ul" | "ol") {
                continue;
            }
        }
        render_inline_into(child, &mut out, false);
    }
    out
}

fn render_inline_into(node: ego_tree::NodeRef<'_, Node>, out: &mut String, is_root: bool) {
    match node.value() {
        Node::Text(t) => push_collapsed(out, t),
        Node::Element(el) => {
            let name = el.name().to_ascii_lowercase();
            match name.as_str() {
                "br" => out.push('\n'),
                "img" => {
                    let alt = el.attr("alt").unwrap_or("");
                    let src = el.attr("src").unwrap_or("");
                    push_token(out, &format!("![{alt}]({src})"));
                }
                "a" => {
                    let href = el.attr("href").unwrap_or("");
                    let mut label = String::new();
                    for child in node.children() {
                        render_inline_into(child, &mut label, false);
                    }
                    let label = label.trim();
                    if label.is_empty() {
                        push_token(out, href);
                    } else if href.is_empty() {
                        push_token(out, label);
                    } else {
                        push_token(out, &format!("[{label}]({href})"));
                    }
                }
                "strong" | "b" => wrap_children(node, out, "**"),
                "em" | "i" => wrap_children(node, out, "*"),
                "code" => {
                    let mut inner = String::new();
                    collect_raw_text(node, &mut inner);
                    push_token(out, &format!("`{}`", inner.trim()));
                }
                _ if is_root || is_inline(&name) => {
                    for child in node.children() {
                        render_inline_into(child, out, false);
                    }
                }
                // block element nested in inline context: degrade to text
                _ => {
                    for child in node.children() {
                        render_inline_into(child, out, false);
                    }
                }
            }
        }
        _ => {}
    }
}

fn wrap_children(node: ego_tree::NodeRef<'_, Node>, out: &mut String, delim: &str) {
    let mut inner = String::new();
    for child in node.children() {
        render_inline_into(child, &mut inner, false);
    }
    let inner = inner.trim();
    if inner.is_empty() {
        return;
    }
    push_token(out, &format!("{delim}{inner}{delim}"));
}

/// Append text with HTML whitespace collapsing: runs of whitespace become a
/// single space, and a leading run only matters if something precedes it.
fn push_collapsed(out: &mut String, text: &str) {
    for ch in text.chars() {
        if ch.is_whitespace() {
            if !out.is_empty() && !out.ends_with(' ') && !out.ends_with('\n') {
                out.push(' ');
            }
        } else {
            out.push(ch);
        }
    }
}

/// Append a rendered token, separating it from a preceding word.
fn push_token(out: &mut String, token: &str) {
    if !out.is_empty() && !out.ends_with(' ') && !out.ends_with('\n') {
        out.push(' ');
    }
    out.push_str(token);
}

fn collect_raw_text(node: ego_tree::NodeRef<'_, Node>, out: &mut String) {
    match node.value() {
        Node::Text(t) => out.push_str(t),
        _ => {
            for child in node.children() {
                collect_raw_text(child, out);
            }
        }
    }
}

fn collect_rows(
    node: ego_tree::NodeRef<'_, Node>,
    rows: &mut Vec<Vec<String>>,
    header: &mut Option<Vec<String>>,
) {
    for child in node.children() {
        let Node::Element(el) = child.value() else { continue };
        match el.name() {
            "thead" | "tbody" | "tfoot" => collect_rows(child, rows, header),
            "tr" => {
                let mut cells = Vec::new();
                let mut all_th = true;
                let mut any_cell = false;
                for cell in child.children() {
                    let Node::Element(cell_el) = cell.value() else { continue };
                    match cell_el.name() {
                        "th" => {
                            any_cell = true;
                            cells.push(table_cell_text(cell));
                        }
                        "td" => {
                            any_cell = true;
                            all_th = false;
                            cells.push(table_cell_text(cell));
                        }
                        _ => {}
                    }
                }
                if !any_cell {
                    continue;
                }
                if all_th && header.is_none() && rows.is_empty() {
                    *header = Some(cells);
                } else {
                    rows.push(cells);
                }
            }
            _ => {}
        }
    }
}

fn table_cell_text(node: ego_tree::NodeRef<'_, Node>) -> String {
    normalize_whitespace(&render_inline(node)).replace('|', "\\|")
}
