//! Stage orchestration: prepare → generate → filter, wired through the
//! config file, with checkpointed resumable generation.

use std::collections::BTreeMap;
use std::fmt;
use std::net::{TcpStream, ToSocketAddrs};
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::PipelineConfig;
use crate::content_prep::{
    assemble_multi_grounding, clean_html, derive_toc, load_documents, load_passages,
    split_passages, to_markdown, ContentError, Passage,
};
use crate::filter::{run_chain, ChainOutcome, Decision, FilterVerdict, Gate};
use crate::gateway::{
    mock, CompletionRequest, CompletionService, GatewayError, HttpCompletionClient, HttpNliClient,
    HttpRewardClient, NliService, RewardService,
};
use crate::hash::sha256_hex;
use crate::metrics::MetricsError;
use crate::store::{
    read_jsonl, truncate_records, Checkpoint, DatasetRecord, DecodeParams, GeneratorInfo,
    JsonlWriter, PassageRef, RecordScores, StoreError,
};
use crate::templates::{
    build_prompt, default_exemplars, parse_completion, parse_exemplar_jsonl, BuiltPrompt,
    Exemplar, ParsedExample, TaskKind, TaskSpec, TemplateError,
};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("config error: {0}")]
    Config(String),
    #[error("no data produced: {0}")]
    EmptyOutput(String),
    #[error("endpoint unreachable: {0}")]
    Endpoint(String),
    #[error(transparent)]
    Content(#[from] ContentError),
    #[error(transparent)]
    Template(#[from] TemplateError),
    #[error("completion for record {index} failed: {source}")]
    Generation { index: usize, source: GatewayError },
    #[error(transparent)]
    Gateway(#[from] GatewayError),
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
}

/// Parse result carried by a generation record.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum ParseOutcome {
    Parsed { example: ParsedExample },
    Failed { error: crate::templates::FormatError },
}

/// One passage run through the generator: prompt, raw completion, parse
/// result, scores, and the verdict trail the filter chain attaches.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GenerationRecord {
    pub passage: Passage,
    pub task_name: TaskKind,
    pub prompt_hash: String,
    pub cue: String,
    pub raw_completion: String,
    pub parse: ParseOutcome,
    pub scores: RecordScores,
    pub verdicts: Vec<FilterVerdict>,
    pub generator: GeneratorInfo,
    #[serde(default)]
    pub sample_index: usize,
}

impl GenerationRecord {
    pub fn parse_result(&self) -> Result<&ParsedExample, &crate::templates::FormatError> {
        match &self.parse {
            ParseOutcome::Parsed { example } => Ok(example),
            ParseOutcome::Failed { error } => Err(error),
        }
    }
}

/// Build a record from a raw completion by parsing it against the task.
pub fn make_record(
    task: &TaskSpec,
    passage: &Passage,
    prompt: &BuiltPrompt,
    completion: String,
    generator: GeneratorInfo,
    sample_index: usize,
) -> GenerationRecord {
    let parse = match parse_completion(task, &prompt.cue, &completion) {
        Ok(example) => ParseOutcome::Parsed { example },
        Err(error) => ParseOutcome::Failed { error },
    };
    GenerationRecord {
        passage: passage.clone(),
        task_name: task.task_name,
        prompt_hash: sha256_hex(&prompt.text),
        cue: prompt.cue.clone(),
        raw_completion: completion,
        parse,
        scores: RecordScores::default(),
        verdicts: Vec::new(),
        generator,
        sample_index,
    }
}

/// The three services resolved from config (mock specs or HTTP clients).
pub struct Services {
    pub completion: Arc<dyn CompletionService>,
    pub nli: Arc<dyn NliService>,
    pub reward: Arc<dyn RewardService>,
}

/// Resolve endpoint specs into service clients.
pub fn build_services(config: &PipelineConfig) -> Result<Services, PipelineError> {
    let task = config.task_spec();
    let endpoints = &config.endpoints;
    let retry = endpoints.retry.policy();

    let completion_url = endpoints
        .completion_url
        .as_deref()
        .ok_or_else(|| PipelineError::Config("no completion endpoint configured".into()))?;
    let completion: Arc<dyn CompletionService> =
        match mock::completion_from_spec(completion_url, &task)? {
            Some(service) => service,
            None => Arc::new(HttpCompletionClient::new(
                completion_url,
                &endpoints.completion_model,
                endpoints.api_key.clone(),
                retry.clone(),
            )),
        };

    let nli_url = endpoints
        .nli_url
        .as_deref()
        .ok_or_else(|| PipelineError::Config("no NLI endpoint configured".into()))?;
    let nli: Arc<dyn NliService> = match mock::nli_from_spec(nli_url)? {
        Some(service) => service,
        None => Arc::new(HttpNliClient::new(
            nli_url,
            &endpoints.nli_model,
            endpoints.api_key.clone(),
            retry.clone(),
            endpoints.nli_transform,
        )),
    };

    let reward_url = endpoints
        .reward_url
        .as_deref()
        .ok_or_else(|| PipelineError::Config("no reward endpoint configured".into()))?;
    let reward: Arc<dyn RewardService> = match mock::reward_from_spec(reward_url)? {
        Some(service) => service,
        None => Arc::new(HttpRewardClient::new(
            reward_url,
            &endpoints.reward_model,
            endpoints.api_key.clone(),
            retry,
            endpoints.reward_transform,
        )),
    };

    Ok(Services { completion, nli, reward })
}

/// TCP reachability probe for an HTTP endpoint; mock specs always pass.
pub fn probe_endpoint(url: &str) -> Result<(), PipelineError> {
    if mock::is_mock_spec(url) {
        return Ok(());
    }
    let rest = url
        .strip_prefix("https://")
        .map(|r| (r, 443u16))
        .or_else(|| url.strip_prefix("http://").map(|r| (r, 80u16)));
    let Some((rest, default_port)) = rest else {
        return Err(PipelineError::Endpoint(format!("unsupported URL: {url}")));
    };
    let authority = rest.split(['/', '?']).next().unwrap_or(rest);
    let address = if authority.contains(':') {
        authority.to_owned()
    } else {
        format!("{authority}:{default_port}")
    };
    let resolved = address
        .to_socket_addrs()
        .map_err(|e| PipelineError::Endpoint(format!("{url}: {e}")))?
        .next()
        .ok_or_else(|| PipelineError::Endpoint(format!("{url}: no address")))?;
    TcpStream::connect_timeout(&resolved, Duration::from_secs(5))
        .map_err(|e| PipelineError::Endpoint(format!("{url}: {e}")))?;
    Ok(())
}

/// Prepare-stage counters.
#[derive(Debug, Clone, Copy, Default, Serialize, Deserialize)]
pub struct PrepareStats {
    pub docs_in: usize,
    pub rejected_docs: usize,
    pub passages_out: usize,
}

/// Turn a corpus (HTML dir, document JSONL, or pre-chunked passage JSONL)
/// into passages. Documents that clean to nothing or segment to nothing are
/// counted as rejected, not fatal.
pub fn prepare_corpus(
    config: &PipelineConfig,
    input: &Path,
) -> Result<(Vec<Passage>, PrepareStats), PipelineError> {
    let mut stats = PrepareStats::default();

    if input.is_file() && peek_is_prechunked(input)? {
        let passages = load_passages(input)?;
        let mut docs = Vec::new();
        for passage in &passages {
            if !docs.contains(&passage.doc_id) {
                docs.push(passage.doc_id.clone());
            }
        }
        stats.docs_in = docs.len();
        let passages = match config.run.multi_grounding_k {
            Some(k) => compose_groups(passages, k)?,
            None => passages,
        };
        stats.passages_out = passages.len();
        return Ok((passages, stats));
    }

    let documents = load_documents(input)?;
    stats.docs_in = documents.len();
    let mut passages = Vec::new();
    for doc in &documents {
        match prepare_document(config, doc) {
            Ok(mut chunk) => passages.append(&mut chunk),
            Err(
                ContentError::MalformedHtml(_)
                | ContentError::EmptyAfterCleaning(_)
                | ContentError::NoPassages(_),
            ) => stats.rejected_docs += 1,
            Err(other) => return Err(other.into()),
        }
    }
    stats.passages_out = passages.len();
    Ok((passages, stats))
}

fn prepare_document(
    config: &PipelineConfig,
    doc: &crate::content_prep::RawDocument,
) -> Result<Vec<Passage>, ContentError> {
    let cleaned = clean_html(doc, &config.cleaning)?;
    let markdown = to_markdown(&cleaned);
    let toc = derive_toc(&markdown);
    split_passages(&markdown, &toc, &config.segmentation)
}

fn peek_is_prechunked(path: &Path) -> Result<bool, PipelineError> {
    let raw = std::fs::read_to_string(path).map_err(ContentError::Io)?;
    for line in raw.lines() {
        if line.trim().is_empty() {
            continue;
        }
        let value: serde_json::Value = serde_json::from_str(line).map_err(|e| {
            PipelineError::Content(ContentError::Parse {
                path: path.display().to_string(),
                line: 1,
                message: e.to_string(),
            })
        })?;
        return Ok(value.get("html").is_none() && value.get("text").is_some());
    }
    Err(PipelineError::EmptyOutput(format!("{} is empty", path.display())))
}

/// Group pre-chunked passages by doc_id (rank = file order) and compose the
/// top-k of each group into one grounding block. Groups smaller than `k` use
/// every passage they have.
fn compose_groups(passages: Vec<Passage>, k: usize) -> Result<Vec<Passage>, PipelineError> {
    if k < 1 {
        return Err(PipelineError::Config("multi_grounding_k must be at least 1".into()));
    }
    let mut order: Vec<String> = Vec::new();
    let mut groups: BTreeMap<String, Vec<Passage>> = BTreeMap::new();
    for passage in passages {
        if !groups.contains_key(&passage.doc_id) {
            order.push(passage.doc_id.clone());
        }
        groups.entry(passage.doc_id.clone()).or_default().push(passage);
    }
    let mut composed = Vec::with_capacity(order.len());
    for doc_id in order {
        let group = &groups[&doc_id];
        let take = k.min(group.len());
        composed.push(assemble_multi_grounding(group, take)?);
    }
    Ok(composed)
}

/// Write passages as JSONL with the config header.
pub fn write_passages(
    config: &PipelineConfig,
    passages: &[Passage],
    path: &Path,
) -> Result<(), PipelineError> {
    let mut writer = JsonlWriter::create(path, Some(&config.header()), config.run.fsync)?;
    for passage in passages {
        writer.append(passage)?;
    }
    writer.finish()?;
    Ok(())
}

/// Generation outcome: all committed records (resumed + new) in input order.
#[derive(Debug)]
pub struct GenerateOutcome {
    pub records: Vec<GenerationRecord>,
    /// Records that existed before this run (resume skip).
    pub resumed: usize,
    /// Completion calls issued by this run.
    pub new_calls: usize,
    pub raw_path: PathBuf,
}

/// Load exemplars from the configured path or the built-in defaults.
pub fn load_exemplars(config: &PipelineConfig, task: &TaskSpec) -> Result<Vec<Exemplar>, PipelineError> {
    let exemplars = match &config.task.exemplars_path {
        Some(path) => {
            let raw = std::fs::read_to_string(path).map_err(ContentError::Io)?;
            parse_exemplar_jsonl(&raw, task)?
        }
        None => default_exemplars(task)?,
    };
    if exemplars.len() < task.shots {
        return Err(PipelineError::Config(format!(
            "task needs {} exemplars, file provides {}",
            task.shots,
            exemplars.len()
        )));
    }
    Ok(exemplars[..task.shots].to_vec())
}

/// Run completion over every passage (times `n_per_passage`), committing
/// records to `raw_generations.jsonl` in input order with a checkpoint after
/// every commit. With `run.resume`, previously committed records are loaded
/// instead of regenerated; the checkpoint refuses to resume under a different
/// config hash.
pub fn generate_records(
    config: &PipelineConfig,
    passages: &[Passage],
    completion: &Arc<dyn CompletionService>,
) -> Result<GenerateOutcome, PipelineError> {
    let task = config.task_spec();
    let exemplars = load_exemplars(config, &task)?;
    let out_dir = &config.run.out_dir;
    let raw_path = out_dir.join("raw_generations.jsonl");
    let config_hash = config.config_hash();
    let generator = GeneratorInfo {
        model_id: config.endpoints.completion_model.clone(),
        decode_params: DecodeParams {
            max_new_tokens: config.endpoints.max_new_tokens,
            temperature: config.endpoints.temperature,
        },
    };

    let jobs: Vec<(usize, &Passage)> = passages
        .iter()
        .flat_map(|p| (0..config.run.n_per_passage).map(move |s| (s, p)))
        .collect();

    let mut records: Vec<GenerationRecord> = Vec::new();
    let mut checkpoint;
    let mut writer;

    let existing = Checkpoint::load(out_dir)?;
    if config.run.resume && raw_path.exists() && existing.is_some() {
        let found = existing.expect("checked above");
        found.verify_config(&config_hash)?;
        let keep = found.committed_count().min(jobs.len());
        truncate_records(&raw_path, keep)?;
        records = read_jsonl(&raw_path)?;
        checkpoint = found;
        checkpoint.last_committed_index = records.len() as i64 - 1;
        writer = JsonlWriter::append_to(&raw_path, records.len(), config.run.fsync)?;
    } else {
        checkpoint = Checkpoint::new(&format!("run-{config_hash}"), &config_hash);
        std::fs::create_dir_all(out_dir).map_err(ContentError::Io)?;
        writer = JsonlWriter::create(&raw_path, Some(&config.header()), config.run.fsync)?;
        checkpoint.save(out_dir)?;
    }

    let resumed = records.len();
    let stop = config.stop_sequences();
    let mut new_calls = 0usize;

    let remaining = &jobs[resumed.min(jobs.len())..];
    let chunk_size = (config.run.max_in_flight * 4).max(1);
    for chunk in remaining.chunks(chunk_size) {
        let requests: Vec<(CompletionRequest, &Passage, usize, BuiltPrompt)> = chunk
            .iter()
            .map(|(sample, passage)| {
                let prompt = build_prompt(&task, &exemplars, &passage.text)?;
                let request = CompletionRequest {
                    prompt: prompt.text.clone(),
                    max_new_tokens: config.endpoints.max_new_tokens,
                    temperature: config.endpoints.temperature,
                    stop_sequences: stop.clone(),
                };
                Ok((request, *passage, *sample, prompt))
            })
            .collect::<Result<_, PipelineError>>()?;

        let results = crate::gateway::map_batched(
            &requests,
            config.run.max_in_flight,
            |(request, _, _, _)| completion.complete(request),
        );
        new_calls += requests.len();

        for ((_, passage, sample, prompt), result) in requests.iter().zip(results) {
            match result {
                Ok(text) => {
                    let record =
                        make_record(&task, passage, prompt, text, generator.clone(), *sample);
                    writer.append(&record)?;
                    checkpoint.last_committed_index += 1;
                    checkpoint.save(out_dir)?;
                    records.push(record);
                }
                Err(source) => {
                    return Err(PipelineError::Generation {
                        index: checkpoint.committed_count(),
                        source,
                    });
                }
            }
        }
    }
    writer.finish()?;

    Ok(GenerateOutcome { records, resumed, new_calls, raw_path })
}

/// Per-gate funnel row: records entering, kept, and rejected by reason.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GateFunnel {
    pub gate: Gate,
    pub entered: usize,
    pub kept: usize,
    pub rejected_by_reason: BTreeMap<String, usize>,
}

/// Stage-by-stage accounting of what filtering removed.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Funnel {
    pub input: usize,
    pub kept: usize,
    pub deduplicated: usize,
    pub gates: Vec<GateFunnel>,
}

impl fmt::Display for Funnel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{:<14} {:>8} {:>8} {:>8}  reasons", "gate", "in", "kept", "rejected")?;
        for row in &self.gates {
            let rejected: usize = row.rejected_by_reason.values().sum();
            let reasons = if row.rejected_by_reason.is_empty() {
                String::from("-")
            } else {
                row.rejected_by_reason
                    .iter()
                    .map(|(reason, count)| format!("{reason}={count}"))
                    .collect::<Vec<_>>()
                    .join(", ")
            };
            let gate = serde_json::to_value(row.gate)
                .ok()
                .and_then(|v| v.as_str().map(str::to_owned))
                .unwrap_or_default();
            writeln!(f, "{gate:<14} {:>8} {:>8} {rejected:>8}  {reasons}", row.entered, row.kept)?;
        }
        writeln!(f, "deduplicated: {}", self.deduplicated)?;
        write!(f, "final kept: {} of {}", self.kept, self.input)
    }
}

fn reason_name(verdict: &FilterVerdict) -> String {
    serde_json::to_value(verdict.reason)
        .ok()
        .and_then(|v| v.as_str().map(str::to_owned))
        .unwrap_or_else(|| format!("{:?}", verdict.reason))
}

fn build_funnel(outcome: &ChainOutcome, gate_order: &[Gate], deduplicated: usize) -> Funnel {
    let input = outcome.kept.len() + outcome.rejected.len();
    let all = outcome.kept.iter().chain(outcome.rejected.iter());
    let trails: Vec<&Vec<FilterVerdict>> = all.map(|r| &r.verdicts).collect();

    let mut gates = Vec::with_capacity(gate_order.len());
    for (index, gate) in gate_order.iter().enumerate() {
        let entered = trails.iter().filter(|t| t.len() > index).count();
        let mut rejected_by_reason: BTreeMap<String, usize> = BTreeMap::new();
        for trail in &trails {
            if let Some(verdict) = trail.get(index) {
                if verdict.decision == Decision::Reject {
                    *rejected_by_reason.entry(reason_name(verdict)).or_default() += 1;
                }
            }
        }
        let rejected: usize = rejected_by_reason.values().sum();
        gates.push(GateFunnel {
            gate: *gate,
            entered,
            kept: entered - rejected,
            rejected_by_reason,
        });
    }

    Funnel {
        input,
        kept: outcome.kept.len() - deduplicated,
        deduplicated,
        gates,
    }
}

fn timestamp(config: &PipelineConfig) -> String {
    config.run.fixed_timestamp.clone().unwrap_or_else(|| {
        chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true)
    })
}

fn to_dataset_record(
    config: &PipelineConfig,
    record: &GenerationRecord,
) -> Option<DatasetRecord> {
    let example = record.parse_result().ok()?;
    Some(DatasetRecord {
        record_id: DatasetRecord::compute_id(
            &record.passage.passage_id,
            &record.generator.model_id,
            &record.prompt_hash,
            record.sample_index,
        ),
        passage: PassageRef {
            passage_id: record.passage.passage_id.clone(),
            doc_id: record.passage.doc_id.clone(),
            section_path: record.passage.section_path.clone(),
            content: record.passage.text.clone(),
        },
        task_name: record.task_name,
        elements: example.elements.clone(),
        scores: record.scores.clone(),
        generator: record.generator.clone(),
        pipeline_version: crate::PIPELINE_VERSION.to_owned(),
        created_at: timestamp(config),
    })
}

/// Run the filter chain, deduplicate survivors, and write `dataset.jsonl`
/// and `rejects.jsonl`.
pub fn filter_records(
    config: &PipelineConfig,
    records: Vec<GenerationRecord>,
    nli: &dyn NliService,
    reward: &dyn RewardService,
) -> Result<(Vec<DatasetRecord>, Funnel), PipelineError> {
    let task = config.task_spec();
    let mut filter_cfg = config.filter.clone();
    filter_cfg.max_in_flight = config.run.max_in_flight;

    let outcome = run_chain(records, &filter_cfg, &task, nli, reward);

    let kept: Vec<DatasetRecord> = outcome
        .kept
        .iter()
        .filter_map(|r| to_dataset_record(config, r))
        .collect();
    let kept_count = kept.len();
    let dataset = crate::store::dedup(kept);
    let deduplicated = kept_count - dataset.len();
    let funnel = build_funnel(&outcome, &filter_cfg.gate_order, deduplicated);

    let out_dir = &config.run.out_dir;
    let mut dataset_writer = JsonlWriter::create(
        &out_dir.join("dataset.jsonl"),
        Some(&config.header()),
        config.run.fsync,
    )?;
    for record in &dataset {
        dataset_writer.append_record(record)?;
    }
    dataset_writer.finish()?;

    let mut rejects_writer = JsonlWriter::create(
        &out_dir.join("rejects.jsonl"),
        Some(&config.header()),
        config.run.fsync,
    )?;
    for record in &outcome.rejected {
        rejects_writer.append(record)?;
    }
    rejects_writer.finish()?;

    Ok((dataset, funnel))
}

/// Full-run summary.
#[derive(Debug)]
pub struct RunSummary {
    pub prepare: PrepareStats,
    pub generated: usize,
    pub resumed: usize,
    pub new_calls: usize,
    pub funnel: Funnel,
    pub out_dir: PathBuf,
}

/// All stages over one corpus: prepare, generate, filter.
pub fn run_all(config: &PipelineConfig, input: &Path) -> Result<RunSummary, PipelineError> {
    let (passages, prepare) = prepare_corpus(config, input)?;
    if passages.is_empty() {
        return Err(PipelineError::EmptyOutput("prepare produced no passages".into()));
    }
    write_passages(config, &passages, &config.run.out_dir.join("passages.jsonl"))?;

    let services = build_services(config)?;
    if let Some(url) = config.endpoints.completion_url.as_deref() {
        probe_endpoint(url)?;
    }
    let generated = generate_records(config, &passages, &services.completion)?;
    let (dataset, funnel) =
        filter_records(config, generated.records, services.nli.as_ref(), services.reward.as_ref())?;
    if dataset.is_empty() {
        return Err(PipelineError::EmptyOutput("filtering kept no records".into()));
    }

    Ok(RunSummary {
        prepare,
        generated: generated.resumed + generated.new_calls,
        resumed: generated.resumed,
        new_calls: generated.new_calls,
        funnel,
        out_dir: config.run.out_dir.clone(),
    })
}

#[cfg(test)]
pub(crate) mod test_support {
    use super::*;
    use std::sync::atomic::{AtomicUsize, Ordering};

    static NEXT_ID: AtomicUsize = AtomicUsize::new(0);

    /// QA record with the given grounding content and optional
    /// question/answer texts; omitting the question drops the answer marker
    /// entirely, so parsing fails with a missing marker.
    pub fn record_with(
        content: &str,
        question: Option<&str>,
        answer: Option<&str>,
    ) -> GenerationRecord {
        let task = TaskSpec::qa();
        let id = NEXT_ID.fetch_add(1, Ordering::SeqCst);
        let passage = Passage::new(
            format!("p{id}"),
            "doc".into(),
            vec!["Section".into()],
            content.to_owned(),
        );
        let completion = match (question, answer) {
            (Some(q), Some(a)) => format!(" {q} [answer] {a}"),
            (Some(q), None) => format!(" {q}"),
            _ => " text with no element markers anywhere".to_owned(),
        };
        let prompt = BuiltPrompt {
            text: format!("[document] {content}\n[question]"),
            cue: "[question]".into(),
        };
        let generator = GeneratorInfo {
            model_id: "mock".into(),
            decode_params: DecodeParams { max_new_tokens: 512, temperature: 0.0 },
        };
        make_record(&task, &passage, &prompt, completion, generator, 0)
    }

    /// Summarization record carrying the instruction element and a summary.
    pub fn summarization_record_with(content: &str, summary: &str) -> GenerationRecord {
        let task = TaskSpec::summarization();
        let id = NEXT_ID.fetch_add(1, Ordering::SeqCst);
        let passage = Passage::new(format!("p{id}"), "doc".into(), vec![], content.to_owned());
        let completion = format!(
            " {} [summary] {summary}",
            task.instruction_marker_text.as_deref().unwrap_or("Summarize.")
        );
        let prompt = BuiltPrompt {
            text: format!("[document] {content}\n[summarize]"),
            cue: "[summarize]".into(),
        };
        let generator = GeneratorInfo {
            model_id: "mock".into(),
            decode_params: DecodeParams { max_new_tokens: 512, temperature: 0.0 },
        };
        make_record(&task, &passage, &prompt, completion, generator, 0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_outcome_round_trips_through_serde() {
        let record = test_support::record_with("some content words", Some("Q?"), Some("A."));
        let json = serde_json::to_string(&record).unwrap();
        let back: GenerationRecord = serde_json::from_str(&json).unwrap();
        assert!(back.parse_result().is_ok());

        let failed = test_support::record_with("some content words", None, None);
        let json = serde_json::to_string(&failed).unwrap();
        let back: GenerationRecord = serde_json::from_str(&json).unwrap();
        assert!(back.parse_result().is_err());
    }

    #[test]
    fn probe_accepts_mocks_rejects_dead_ports() {
        assert!(probe_endpoint("mock:scripted").is_ok());
        assert!(probe_endpoint("http://127.0.0.1:9").is_err());
        assert!(probe_endpoint("ftp://weird").is_err());
    }

    #[test]
    fn build_services_needs_all_three_endpoints() {
        let mut config = PipelineConfig::default();
        assert!(matches!(build_services(&config), Err(PipelineError::Config(_))));
        config.endpoints.completion_url = Some("mock:scripted".into());
        config.endpoints.nli_url = Some("mock:const:0.9".into());
        config.endpoints.reward_url = Some("mock:const:0.9".into());
        assert!(build_services(&config).is_ok());
    }
}
