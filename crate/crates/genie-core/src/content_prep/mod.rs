//! Content preparation: raw HTML → cleaned DOM → Markdown → table of
//! contents → grounding passages.
//!
//! Everything here is a pure function of its inputs; callers may fan
//! documents out across threads freely.

mod clean;
mod ingest;
mod markdown;
mod segment;
mod toc;

pub use clean::{clean_html, CleaningConfig};
pub use ingest::{load_documents, load_passages};
pub use markdown::to_markdown;
pub use segment::{assemble_multi_grounding, split_passages, SegmentationConfig};
pub use toc::derive_toc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::text;

/// A fetched document, before any processing. Fetching itself (crawling,
/// browser emulation) is out of scope: inputs are files or JSONL records.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RawDocument {
    pub doc_id: String,
    pub source_uri: String,
    pub html: String,
    #[serde(default)]
    pub fetched_at: String,
}

/// HTML with navigation/boilerplate regions removed, main content retained.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CleanDocument {
    pub doc_id: String,
    pub html: String,
}

/// One heading in the rendered Markdown.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Heading {
    pub level: u8,
    pub title: String,
    /// Byte offset of the heading line start in [`MarkdownDoc::markdown`].
    pub byte_offset: usize,
}

/// Markdown rendering of a cleaned document plus its heading index.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MarkdownDoc {
    pub doc_id: String,
    pub markdown: String,
    pub headings: Vec<Heading>,
}

/// A table-of-contents node covering a byte range of the Markdown.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TocEntry {
    pub title: String,
    /// Heading level; 0 for synthetic entries (preamble, heading-less docs).
    pub level: u8,
    /// Byte span into the Markdown, heading line included.
    pub span: (usize, usize),
    pub children: Vec<TocEntry>,
}

/// Document structure derived from the heading index.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Toc {
    pub entries: Vec<TocEntry>,
}

/// A grounding content unit with provenance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Passage {
    pub passage_id: String,
    pub doc_id: String,
    pub section_path: Vec<String>,
    pub text: String,
    pub word_count: usize,
    /// Set only when a whole document is shorter than the configured
    /// minimum, so one undersized passage is emitted rather than none.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub undersized: bool,
}

impl Passage {
    pub fn new(passage_id: String, doc_id: String, section_path: Vec<String>, text: String) -> Passage {
        let word_count = text::word_count(&text);
        Passage {
            passage_id,
            doc_id,
            section_path,
            text,
            word_count,
            undersized: false,
        }
    }
}

#[derive(Debug, Error)]
pub enum ContentError {
    #[error("no DOM could be constructed from document {0:?}")]
    MalformedHtml(String),
    #[error("no content-bearing text survives cleaning in document {0:?}")]
    EmptyAfterCleaning(String),
    #[error("document {0:?} yields no passages")]
    NoPassages(String),
    #[error("empty input")]
    EmptyInput,
    #[error("k = {k} is out of range for {available} passages")]
    InvalidK { k: usize, available: usize },
    #[error("invalid segmentation config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("{path}:{line}: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },
}
