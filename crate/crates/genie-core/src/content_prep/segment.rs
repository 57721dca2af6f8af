//! Passage segmentation over the TOC, plus multi-document grounding blocks.

use serde::{Deserialize, Serialize};

use crate::text;

use super::{ContentError, MarkdownDoc, Passage, Toc, TocEntry};

/// Passage length bounds in pipeline words.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SegmentationConfig {
    pub min_words: usize,
    pub max_words: usize,
}

impl Default for SegmentationConfig {
    fn default() -> Self {
        SegmentationConfig { min_words: 40, max_words: 600 }
    }
}

impl SegmentationConfig {
    pub fn validate(&self) -> Result<(), ContentError> {
        if self.min_words < 1 {
            return Err(ContentError::InvalidConfig("min_words must be at least 1".into()));
        }
        if self.max_words <= self.min_words {
            return Err(ContentError::InvalidConfig(
                "max_words must be greater than min_words".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
struct Candidate {
    text: String,
    section_path: Vec<String>,
}

impl Candidate {
    fn words(&self) -> usize {
        text::word_count(&self.text)
    }
}

/// Segment a document into passages.
///
/// Each TOC entry's own text (its span minus the heading line and minus child
/// spans) becomes a candidate. Candidates below `min_words` merge forward
/// into the next candidate, or backward at the document tail; candidates
/// above `max_words` split greedily at paragraph boundaries. A document
/// shorter than `min_words` overall yields one passage flagged `undersized`.
pub fn split_passages(
    doc: &MarkdownDoc,
    toc: &Toc,
    cfg: &SegmentationConfig,
) -> Result<Vec<Passage>, ContentError> {
    cfg.validate()?;

    let mut candidates = Vec::new();
    for entry in &toc.entries {
        collect_candidates(doc, entry, &mut Vec::new(), &mut candidates);
    }
    if candidates.is_empty() {
        return Err(ContentError::NoPassages(doc.doc_id.clone()));
    }

    let merged = merge_short(candidates, cfg.min_words);
    let mut passages = Vec::new();
    for candidate in merged {
        for piece in split_long(candidate, cfg) {
            let word_count = piece.words();
            let index = passages.len();
            passages.push(Passage {
                passage_id: format!("{}#{index:04}", doc.doc_id),
                doc_id: doc.doc_id.clone(),
                section_path: piece.section_path,
                text: piece.text,
                word_count,
                undersized: word_count < cfg.min_words,
            });
        }
    }
    if passages.is_empty() {
        return Err(ContentError::NoPassages(doc.doc_id.clone()));
    }
    Ok(passages)
}

/// Own text of a TOC entry: span minus its heading line minus child spans.
fn collect_candidates(
    doc: &MarkdownDoc,
    entry: &TocEntry,
    path: &mut Vec<String>,
    out: &mut Vec<Candidate>,
) {
    if !entry.title.is_empty() {
        path.push(entry.title.clone());
    }

    let (start, end) = entry.span;
    let own_start = if entry.level > 0 {
        // skip the heading line itself
        doc.markdown[start..end]
            .find('\n')
            .map(|i| start + i + 1)
            .unwrap_or(end)
    } else {
        start
    };
    let own_end = entry.children.first().map(|c| c.span.0).unwrap_or(end);
    if own_start < own_end {
        let own_text = doc.markdown[own_start..own_end].trim();
        if !own_text.is_empty() {
            out.push(Candidate {
                text: own_text.to_owned(),
                section_path: path.clone(),
            });
        }
    }
    for child in &entry.children {
        collect_candidates(doc, child, path, out);
    }

    if !entry.title.is_empty() {
        path.pop();
    }
}

/// Forward-merge candidates below the minimum; the last short candidate
/// merges backward into its predecessor. The merged passage keeps the
/// section path of its first constituent.
fn merge_short(candidates: Vec<Candidate>, min_words: usize) -> Vec<Candidate> {
    let mut result: Vec<Candidate> = Vec::with_capacity(candidates.len());
    let mut pending: Option<Candidate> = None;
    for candidate in candidates {
        let merged = match pending.take() {
            Some(prefix) => join(prefix, candidate),
            None => candidate,
        };
        if merged.words() < min_words {
            pending = Some(merged);
        } else {
            result.push(merged);
        }
    }
    if let Some(tail) = pending {
        match result.pop() {
            Some(last) => result.push(join(last, tail)),
            None => result.push(tail), // whole document is short
        }
    }
    result
}

fn join(first: Candidate, second: Candidate) -> Candidate {
    Candidate {
        text: format!("{}\n\n{}", first.text, second.text),
        section_path: first.section_path,
    }
}

/// Greedy paragraph packing under `max_words`, with a word-level rebalance
/// when the tail would fall below `min_words`.
fn split_long(candidate: Candidate, cfg: &SegmentationConfig) -> Vec<Candidate> {
    if candidate.words() <= cfg.max_words {
        return vec![candidate];
    }
    let path = candidate.section_path;

    // paragraphs, with any single oversized paragraph pre-split at word
    // boundaries into nearly-equal pieces
    let mut paragraphs: Vec<String> = Vec::new();
    for para in candidate.text.split("\n\n").filter(|p| !p.trim().is_empty()) {
        let count = text::word_count(para);
        if count <= cfg.max_words {
            paragraphs.push(para.trim().to_owned());
        } else {
            let words: Vec<&str> = para.split_whitespace().collect();
            let pieces = count.div_ceil(cfg.max_words);
            let per_piece = words.len().div_ceil(pieces);
            for chunk in words.chunks(per_piece) {
                paragraphs.push(chunk.join(" "));
            }
        }
    }

    let mut chunks: Vec<Vec<String>> = Vec::new();
    let mut current: Vec<String> = Vec::new();
    let mut current_words = 0usize;
    for para in paragraphs {
        let para_words = text::word_count(&para);
        if current_words + para_words > cfg.max_words && !current.is_empty() {
            chunks.push(std::mem::take(&mut current));
            current_words = 0;
        }
        current_words += para_words;
        current.push(para);
    }
    if !current.is_empty() {
        chunks.push(current);
    }

    let mut texts: Vec<String> = chunks.into_iter().map(|c| c.join("\n\n")).collect();

    // rebalance an undersized tail against its predecessor
    if texts.len() >= 2 {
        let tail_words = text::word_count(texts.last().unwrap());
        if tail_words < cfg.min_words {
            let tail = texts.pop().unwrap();
            let prev = texts.pop().unwrap();
            let combined_words = text::word_count(&prev) + tail_words;
            if combined_words <= cfg.max_words {
                texts.push(format!("{prev}\n\n{tail}"));
            } else if combined_words >= 2 * cfg.min_words {
                let combined = format!("{prev} {tail}");
                let words: Vec<&str> = combined.split_whitespace().collect();
                let tail_size = (words.len() / 2)
                    .clamp(cfg.min_words, words.len() - cfg.min_words)
                    .min(cfg.max_words);
                let cut = words.len() - tail_size;
                texts.push(words[..cut].join(" "));
                texts.push(words[cut..].join(" "));
            } else {
                // cannot satisfy both bounds; keep the undersized tail flagged
                texts.push(prev);
                texts.push(tail);
            }
        }
    }

    texts
        .into_iter()
        .map(|text| Candidate { text, section_path: path.clone() })
        .collect()
}

/// Join the top `k` retrieval-ranked passages into one grounding block.
pub fn assemble_multi_grounding(passages: &[Passage], k: usize) -> Result<Passage, ContentError> {
    if passages.is_empty() {
        return Err(ContentError::EmptyInput);
    }
    if k < 1 || k > passages.len() {
        return Err(ContentError::InvalidK { k, available: passages.len() });
    }
    let chosen = &passages[..k];
    let text = chosen.iter().map(|p| p.text.as_str()).collect::<Vec<_>>().join("\n\n");
    let ids = chosen.iter().map(|p| p.passage_id.as_str()).collect::<Vec<_>>().join("+");
    let mut doc_ids: Vec<&str> = Vec::new();
    for passage in chosen {
        if !doc_ids.contains(&passage.doc_id.as_str()) {
            doc_ids.push(&passage.doc_id);
        }
    }
    Ok(Passage::new(
        format!("multi({ids})"),
        doc_ids.join("+"),
        Vec::new(),
        text,
    ))
}
