//! JSONL persistence with provenance, checkpoint/resume, deduplication, and
//! doc-grouped splitting.
//!
//! Every output file may start with one header line
//! (`{"record_type": "header", ...}`) carrying the effective run config;
//! readers skip it. Appends flush line-by-line so a checkpoint can trust the
//! committed prefix after a crash.

use std::collections::HashSet;
use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::hash::short_hash;
use crate::templates::{Element, TaskKind};
use crate::text;

#[derive(Debug, Error)]
pub enum StoreError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("schema violation: {0}")]
    SchemaViolation(String),
    #[error("bad split ratios: {0}")]
    RatioError(String),
    #[error("{path}:{line}: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },
    #[error("checkpoint belongs to a different config (expected {expected}, found {found})")]
    ConfigMismatch { expected: String, found: String },
}

/// Decode parameters recorded for provenance.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DecodeParams {
    pub max_new_tokens: u32,
    pub temperature: f64,
}

/// Which model produced a record, and how.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GeneratorInfo {
    pub model_id: String,
    pub decode_params: DecodeParams,
}

/// Grounding fields carried by every dataset record.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PassageRef {
    pub passage_id: String,
    pub doc_id: String,
    pub section_path: Vec<String>,
    pub content: String,
}

/// Entailment and reward scores attached by the filter chain.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct RecordScores {
    pub entailment: Option<f64>,
    pub reward: Option<f64>,
}

/// One kept content-example pair.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DatasetRecord {
    pub record_id: String,
    pub passage: PassageRef,
    pub task_name: TaskKind,
    pub elements: Vec<Element>,
    pub scores: RecordScores,
    pub generator: GeneratorInfo,
    pub pipeline_version: String,
    pub created_at: String,
}

impl DatasetRecord {
    /// Deterministic id from the defining fields. `sample_index` contributes
    /// only when several generations per passage are requested.
    pub fn compute_id(
        passage_id: &str,
        model_id: &str,
        prompt_hash: &str,
        sample_index: usize,
    ) -> String {
        let base = format!("{passage_id}\u{1f}{model_id}\u{1f}{prompt_hash}");
        if sample_index == 0 {
            short_hash(&base)
        } else {
            short_hash(&format!("{base}\u{1f}{sample_index}"))
        }
    }

    pub fn validate(&self) -> Result<(), StoreError> {
        if self.record_id.is_empty() {
            return Err(StoreError::SchemaViolation("empty record_id".into()));
        }
        if self.elements.is_empty() {
            return Err(StoreError::SchemaViolation("record has no elements".into()));
        }
        if self.elements.iter().any(|e| e.text.trim().is_empty()) {
            return Err(StoreError::SchemaViolation("record has a blank element".into()));
        }
        if self.passage.content.trim().is_empty() {
            return Err(StoreError::SchemaViolation("record has no grounding content".into()));
        }
        Ok(())
    }

    /// The response element text (answer/summary/extraction).
    pub fn response_text(&self) -> &str {
        self.elements.last().map(|e| e.text.as_str()).unwrap_or("")
    }

    /// Key for deduplication: whitespace-collapsed, lowercased
    /// (content, elements) pair.
    pub fn dedup_key(&self) -> String {
        let mut parts = vec![text::normalize_whitespace(&self.passage.content).to_lowercase()];
        for el in &self.elements {
            parts.push(el.marker.clone());
            parts.push(text::normalize_whitespace(&el.text).to_lowercase());
        }
        short_hash(&parts.join("\u{1f}"))
    }
}

/// Whether appends fsync the file descriptor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FsyncPolicy {
    #[default]
    OnClose,
    EveryAppend,
}

/// Append-only JSONL writer with monotone record indices.
pub struct JsonlWriter {
    file: BufWriter<File>,
    path: PathBuf,
    next_index: usize,
    fsync: FsyncPolicy,
}

impl JsonlWriter {
    /// Create (truncate) a new file, optionally writing a header line first.
    pub fn create(
        path: &Path,
        header: Option<&serde_json::Value>,
        fsync: FsyncPolicy,
    ) -> Result<JsonlWriter, StoreError> {
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent)?;
        }
        let mut file = BufWriter::new(File::create(path)?);
        if let Some(header) = header {
            let mut line = serde_json::json!({"record_type": "header"});
            line.as_object_mut()
                .expect("object literal")
                .extend(header.as_object().cloned().unwrap_or_default());
            serde_json::to_writer(&mut file, &line)
                .map_err(|e| StoreError::SchemaViolation(e.to_string()))?;
            file.write_all(b"\n")?;
            file.flush()?;
        }
        Ok(JsonlWriter { file, path: path.to_owned(), next_index: 0, fsync })
    }

    /// Reopen an existing file for appending after `existing` records.
    pub fn append_to(path: &Path, existing: usize, fsync: FsyncPolicy) -> Result<JsonlWriter, StoreError> {
        let file = BufWriter::new(OpenOptions::new().append(true).open(path)?);
        Ok(JsonlWriter { file, path: path.to_owned(), next_index: existing, fsync })
    }

    /// Serialize one record as a line; returns its committed index.
    pub fn append<T: Serialize>(&mut self, record: &T) -> Result<usize, StoreError> {
        serde_json::to_writer(&mut self.file, record)
            .map_err(|e| StoreError::SchemaViolation(e.to_string()))?;
        self.file.write_all(b"\n")?;
        self.file.flush()?;
        if self.fsync == FsyncPolicy::EveryAppend {
            self.file.get_ref().sync_data()?;
        }
        let index = self.next_index;
        self.next_index += 1;
        Ok(index)
    }

    /// Validating append for dataset records.
    pub fn append_record(&mut self, record: &DatasetRecord) -> Result<usize, StoreError> {
        record.validate()?;
        self.append(record)
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn finish(mut self) -> Result<(), StoreError> {
        self.file.flush()?;
        self.file.get_ref().sync_data()?;
        Ok(())
    }
}

fn is_header_line(value: &serde_json::Value) -> bool {
    value.get("record_type").and_then(|v| v.as_str()) == Some("header")
}

/// Read all records from a JSONL file, skipping a header line and any torn
/// trailing line (no terminating newline).
pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>, StoreError> {
    Ok(read_jsonl_with_header(path)?.1)
}

/// Like [`read_jsonl`], also returning the header object when present.
pub fn read_jsonl_with_header<T: DeserializeOwned>(
    path: &Path,
) -> Result<(Option<serde_json::Value>, Vec<T>), StoreError> {
    let file = File::open(path)?;
    let mut reader = BufReader::new(file);
    let mut header = None;
    let mut records = Vec::new();
    let mut lineno = 0usize;
    let mut buf = String::new();
    loop {
        buf.clear();
        let n = reader.read_line(&mut buf)?;
        if n == 0 {
            break;
        }
        lineno += 1;
        if !buf.ends_with('\n') {
            break; // torn write from an interrupted run
        }
        let line = buf.trim_end();
        if line.is_empty() {
            continue;
        }
        let value: serde_json::Value =
            serde_json::from_str(line).map_err(|e| StoreError::Parse {
                path: path.display().to_string(),
                line: lineno,
                message: e.to_string(),
            })?;
        if lineno == 1 && is_header_line(&value) {
            header = Some(value);
            continue;
        }
        let record: T = serde_json::from_value(value).map_err(|e| StoreError::Parse {
            path: path.display().to_string(),
            line: lineno,
            message: e.to_string(),
        })?;
        records.push(record);
    }
    Ok((header, records))
}

/// Count committed (complete, non-header) records in a JSONL file.
pub fn count_records(path: &Path) -> Result<usize, StoreError> {
    if !path.exists() {
        return Ok(0);
    }
    Ok(read_jsonl::<serde_json::Value>(path)?.len())
}

/// Rewrite a JSONL file keeping the header and the first `keep` records.
/// Drops torn lines and anything past the checkpointed prefix.
pub fn truncate_records(path: &Path, keep: usize) -> Result<usize, StoreError> {
    let (header, records) = read_jsonl_with_header::<serde_json::Value>(path)?;
    let kept: Vec<_> = records.into_iter().take(keep).collect();
    let tmp = path.with_extension("tmp");
    {
        let mut file = BufWriter::new(File::create(&tmp)?);
        if let Some(header) = &header {
            serde_json::to_writer(&mut file, header)
                .map_err(|e| StoreError::SchemaViolation(e.to_string()))?;
            file.write_all(b"\n")?;
        }
        for record in &kept {
            serde_json::to_writer(&mut file, record)
                .map_err(|e| StoreError::SchemaViolation(e.to_string()))?;
            file.write_all(b"\n")?;
        }
        file.flush()?;
        file.get_ref().sync_data()?;
    }
    fs::rename(&tmp, path)?;
    Ok(kept.len())
}

/// Resume marker for a generation run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Checkpoint {
    pub run_id: String,
    /// Index of the last committed record; -1 before any commit.
    pub last_committed_index: i64,
    pub config_hash: String,
}

impl Checkpoint {
    pub fn new(run_id: &str, config_hash: &str) -> Checkpoint {
        Checkpoint {
            run_id: run_id.to_owned(),
            last_committed_index: -1,
            config_hash: config_hash.to_owned(),
        }
    }

    pub fn committed_count(&self) -> usize {
        (self.last_committed_index + 1).max(0) as usize
    }

    pub fn path_in(dir: &Path) -> PathBuf {
        dir.join("checkpoint.json")
    }

    /// Atomic write via temp file + rename.
    pub fn save(&self, dir: &Path) -> Result<(), StoreError> {
        fs::create_dir_all(dir)?;
        let path = Checkpoint::path_in(dir);
        let tmp = path.with_extension("json.tmp");
        let mut file = File::create(&tmp)?;
        serde_json::to_writer_pretty(&mut file, self)
            .map_err(|e| StoreError::SchemaViolation(e.to_string()))?;
        file.sync_data()?;
        fs::rename(&tmp, &path)?;
        Ok(())
    }

    pub fn load(dir: &Path) -> Result<Option<Checkpoint>, StoreError> {
        let path = Checkpoint::path_in(dir);
        if !path.exists() {
            return Ok(None);
        }
        let raw = fs::read_to_string(&path)?;
        let checkpoint: Checkpoint = serde_json::from_str(&raw).map_err(|e| StoreError::Parse {
            path: path.display().to_string(),
            line: 0,
            message: e.to_string(),
        })?;
        Ok(Some(checkpoint))
    }

    /// Refuse to resume under a different effective config.
    pub fn verify_config(&self, config_hash: &str) -> Result<(), StoreError> {
        if self.config_hash != config_hash {
            return Err(StoreError::ConfigMismatch {
                expected: config_hash.to_owned(),
                found: self.config_hash.clone(),
            });
        }
        Ok(())
    }
}

/// Drop records whose normalized (content, elements) pair was already seen;
/// first occurrence wins, order is stable.
pub fn dedup(records: Vec<DatasetRecord>) -> Vec<DatasetRecord> {
    let mut seen = HashSet::new();
    records
        .into_iter()
        .filter(|r| seen.insert(r.dedup_key()))
        .collect()
}

/// Train/dev/test split result.
#[derive(Debug, Default)]
pub struct Splits {
    pub train: Vec<DatasetRecord>,
    pub dev: Vec<DatasetRecord>,
    pub test: Vec<DatasetRecord>,
}

/// Deterministic doc-grouped split: all records of a document land in one
/// split, so near-duplicate grounding never leaks across sets. Dev and test
/// sizes round down; the remainder goes to train.
pub fn split(
    records: Vec<DatasetRecord>,
    ratios: (f64, f64, f64),
    seed: u64,
) -> Result<Splits, StoreError> {
    let (train_ratio, dev_ratio, test_ratio) = ratios;
    if train_ratio < 0.0 || dev_ratio < 0.0 || test_ratio < 0.0 {
        return Err(StoreError::RatioError("ratios must be non-negative".into()));
    }
    let sum = train_ratio + dev_ratio + test_ratio;
    if (sum - 1.0).abs() > 1e-9 {
        return Err(StoreError::RatioError(format!("ratios sum to {sum}, expected 1")));
    }

    let mut doc_ids: Vec<String> = Vec::new();
    let mut seen = HashSet::new();
    for record in &records {
        if seen.insert(record.passage.doc_id.clone()) {
            doc_ids.push(record.passage.doc_id.clone());
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    doc_ids.shuffle(&mut rng);

    let n = doc_ids.len();
    let n_dev = (dev_ratio * n as f64).floor() as usize;
    let n_test = (test_ratio * n as f64).floor() as usize;
    let n_train = n - n_dev - n_test;

    let assign = |doc: &str| -> usize {
        let pos = doc_ids.iter().position(|d| d == doc).expect("doc seen above");
        if pos < n_train {
            0
        } else if pos < n_train + n_dev {
            1
        } else {
            2
        }
    };

    let mut splits = Splits::default();
    for record in records {
        match assign(&record.passage.doc_id) {
            0 => splits.train.push(record),
            1 => splits.dev.push(record),
            _ => splits.test.push(record),
        }
    }
    Ok(splits)
}
