//! Corpus input: a directory of `.html` files, a JSONL file of raw
//! documents, or a JSONL file of ready-made passages.

use std::collections::HashSet;
use std::path::Path;

use super::{ContentError, Passage, RawDocument};
use crate::text;

/// Load raw documents from a directory of `.html` files (sorted by name,
/// doc_id = file stem) or a JSONL file of `{doc_id, source_uri, html}`.
pub fn load_documents(input: &Path) -> Result<Vec<RawDocument>, ContentError> {
    if input.is_dir() {
        let mut paths: Vec<_> = std::fs::read_dir(input)?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|ext| ext == "html" || ext == "htm"))
            .collect();
        paths.sort();
        let mut docs = Vec::with_capacity(paths.len());
        for path in paths {
            let html = std::fs::read_to_string(&path)?;
            let doc_id = path
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| "doc".to_owned());
            docs.push(RawDocument {
                doc_id,
                source_uri: format!("file://{}", path.display()),
                html,
                fetched_at: String::new(),
            });
        }
        return Ok(docs);
    }

    let raw = std::fs::read_to_string(input)?;
    let mut docs = Vec::new();
    let mut seen = HashSet::new();
    for (lineno, line) in raw.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let doc: RawDocument = serde_json::from_str(line).map_err(|e| ContentError::Parse {
            path: input.display().to_string(),
            line: lineno + 1,
            message: e.to_string(),
        })?;
        if doc.html.is_empty() {
            return Err(ContentError::Parse {
                path: input.display().to_string(),
                line: lineno + 1,
                message: format!("document {:?} has empty html", doc.doc_id),
            });
        }
        if !seen.insert(doc.doc_id.clone()) {
            return Err(ContentError::Parse {
                path: input.display().to_string(),
                line: lineno + 1,
                message: format!("duplicate doc_id {:?}", doc.doc_id),
            });
        }
        docs.push(doc);
    }
    Ok(docs)
}

/// Load a pre-chunked corpus: JSONL of
/// `{passage_id, doc_id, section_path, text}`. Word counts are recomputed;
/// a stored count that disagrees with the pipeline tokenizer is an error.
pub fn load_passages(input: &Path) -> Result<Vec<Passage>, ContentError> {
    #[derive(serde::Deserialize)]
    struct Row {
        passage_id: String,
        doc_id: String,
        #[serde(default)]
        section_path: Vec<String>,
        text: String,
        #[serde(default)]
        word_count: Option<usize>,
    }

    let raw = std::fs::read_to_string(input)?;
    let mut passages = Vec::new();
    let mut seen = HashSet::new();
    for (lineno, line) in raw.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let parse_err = |message: String| ContentError::Parse {
            path: input.display().to_string(),
            line: lineno + 1,
            message,
        };
        let row: Row = serde_json::from_str(line).map_err(|e| parse_err(e.to_string()))?;
        if row.text.trim().is_empty() {
            return Err(parse_err(format!("passage {:?} has empty text", row.passage_id)));
        }
        if !seen.insert(row.passage_id.clone()) {
            return Err(parse_err(format!("duplicate passage_id {:?}", row.passage_id)));
        }
        let computed = text::word_count(&row.text);
        if let Some(stored) = row.word_count {
            if stored != computed {
                return Err(parse_err(format!(
                    "passage {:?} claims {stored} words, tokenizer counts {computed}",
                    row.passage_id
                )));
            }
        }
        passages.push(Passage {
            passage_id: row.passage_id,
            doc_id: row.doc_id,
            section_path: row.section_path,
            text: row.text,
            word_count: computed,
            undersized: false,
        });
    }
    Ok(passages)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;
    use tempfile::tempdir;

    #[test]
    fn html_directory_loads_sorted_by_name() {
        let dir = tempdir().unwrap();
        for name in ["b.html", "a.html", "ignored.txt"] {
            let mut f = std::fs::File::create(dir.path().join(name)).unwrap();
            writeln!(f, "<html><body><p>{name}</p></body></html>").unwrap();
        }
        let docs = load_documents(dir.path()).unwrap();
        assert_eq!(docs.len(), 2);
        assert_eq!(docs[0].doc_id, "a");
        assert_eq!(docs[1].doc_id, "b");
    }

    #[test]
    fn jsonl_documents_reject_duplicates_and_empty_html() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("docs.jsonl");
        std::fs::write(
            &path,
            r#"{"doc_id":"a","source_uri":"u","html":"<p>x</p>"}
{"doc_id":"a","source_uri":"u","html":"<p>y</p>"}
"#,
        )
        .unwrap();
        assert!(matches!(load_documents(&path), Err(ContentError::Parse { .. })));

        std::fs::write(&path, r#"{"doc_id":"a","source_uri":"u","html":""}"#).unwrap();
        assert!(matches!(load_documents(&path), Err(ContentError::Parse { .. })));
    }

    #[test]
    fn prechunked_passages_validate_and_recompute_counts() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("passages.jsonl");
        std::fs::write(
            &path,
            r#"{"passage_id":"p1","doc_id":"d","section_path":["S"],"text":"five words are in here"}
{"passage_id":"p2","doc_id":"d","text":"two words","word_count":2}
"#,
        )
        .unwrap();
        let passages = load_passages(&path).unwrap();
        assert_eq!(passages[0].word_count, 5);
        assert_eq!(passages[1].word_count, 2);

        std::fs::write(
            &path,
            r#"{"passage_id":"p1","doc_id":"d","text":"two words","word_count":7}"#,
        )
        .unwrap();
        assert!(matches!(load_passages(&path), Err(ContentError::Parse { .. })));
    }
}
