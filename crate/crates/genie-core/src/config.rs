//! The single pipeline config file (TOML) and its resolution order:
//! environment variables fill endpoint defaults, the config file overrides
//! them, and CLI flags override everything. The hash of the fully resolved
//! config stamps every output file and guards checkpoint resume.

use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::content_prep::{CleaningConfig, SegmentationConfig};
use crate::filter::FilterConfig;
use crate::gateway::{RetryPolicy, ScoreTransform};
use crate::hash::short_hash;
use crate::store::FsyncPolicy;
use crate::templates::{Ratio, TaskKind, TaskSpec};

pub const ENV_COMPLETION_URL: &str = "GENIE_COMPLETION_URL";
pub const ENV_NLI_URL: &str = "GENIE_NLI_URL";
pub const ENV_REWARD_URL: &str = "GENIE_REWARD_URL";
pub const ENV_API_KEY: &str = "GENIE_API_KEY";

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("config parse error: {0}")]
    Parse(String),
    #[error("invalid config: {0}")]
    Invalid(String),
}

/// Task section: overrides on top of the per-task defaults.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TaskSection {
    pub name: Option<TaskKind>,
    pub markers: Option<Vec<String>>,
    pub instruction: Option<String>,
    pub length_ratio_cap: Option<Ratio>,
    pub min_example_words: Option<usize>,
    pub shots: Option<usize>,
    /// JSONL exemplar file; built-in exemplars are used when unset.
    pub exemplars_path: Option<PathBuf>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RetrySection {
    pub base_ms: u64,
    pub factor: f64,
    pub max_attempts: u32,
}

impl Default for RetrySection {
    fn default() -> Self {
        RetrySection { base_ms: 1000, factor: 2.0, max_attempts: 5 }
    }
}

impl RetrySection {
    pub fn policy(&self) -> RetryPolicy {
        RetryPolicy {
            base: Duration::from_millis(self.base_ms),
            factor: self.factor,
            max_attempts: self.max_attempts.max(1),
        }
    }
}

/// Endpoint URLs (`http(s)://…` or `mock:…`), model ids, and decode options.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EndpointsSection {
    pub completion_url: Option<String>,
    pub nli_url: Option<String>,
    pub reward_url: Option<String>,
    pub api_key: Option<String>,
    pub completion_model: String,
    pub nli_model: String,
    pub reward_model: String,
    pub max_new_tokens: u32,
    pub temperature: f64,
    /// Defaults to the task's document marker.
    pub stop_sequences: Option<Vec<String>>,
    pub nli_transform: ScoreTransform,
    pub reward_transform: ScoreTransform,
    pub retry: RetrySection,
}

impl Default for EndpointsSection {
    fn default() -> Self {
        EndpointsSection {
            completion_url: None,
            nli_url: None,
            reward_url: None,
            api_key: None,
            completion_model: "completion".into(),
            nli_model: "nli".into(),
            reward_model: "reward".into(),
            max_new_tokens: 1024,
            temperature: 0.0,
            stop_sequences: None,
            nli_transform: ScoreTransform::Identity,
            reward_transform: ScoreTransform::Identity,
            retry: RetrySection::default(),
        }
    }
}

/// Run-level knobs: seed, concurrency, output directory, resume.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunSection {
    pub seed: u64,
    pub max_in_flight: usize,
    pub out_dir: PathBuf,
    pub resume: bool,
    pub n_per_passage: usize,
    /// Compose each group of pre-chunked passages (grouped by doc_id, in
    /// retrieval-rank order) into one top-k grounding block.
    pub multi_grounding_k: Option<usize>,
    /// RFC 3339 timestamp stamped on records instead of the wall clock;
    /// set it to make repeated runs byte-identical.
    pub fixed_timestamp: Option<String>,
    pub fsync: FsyncPolicy,
}

impl Default for RunSection {
    fn default() -> Self {
        RunSection {
            seed: 42,
            max_in_flight: 4,
            out_dir: PathBuf::from("out"),
            resume: false,
            n_per_passage: 1,
            multi_grounding_k: None,
            fixed_timestamp: None,
            fsync: FsyncPolicy::OnClose,
        }
    }
}

/// The whole pipeline configuration.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub task: TaskSection,
    pub segmentation: SegmentationConfig,
    pub cleaning: CleaningConfig,
    pub filter: FilterConfig,
    pub endpoints: EndpointsSection,
    pub run: RunSection,
}

impl PipelineConfig {
    /// Load from a TOML file (or defaults when `path` is `None`), then fill
    /// unset endpoint fields from the `GENIE_*` environment variables.
    pub fn load(path: Option<&Path>) -> Result<PipelineConfig, ConfigError> {
        let mut config: PipelineConfig = match path {
            Some(path) => {
                let raw = std::fs::read_to_string(path)?;
                toml::from_str(&raw).map_err(|e| ConfigError::Parse(e.to_string()))?
            }
            None => PipelineConfig::default(),
        };
        config.fill_from_env();
        config.validate()?;
        Ok(config)
    }

    fn fill_from_env(&mut self) {
        let fill = |slot: &mut Option<String>, var: &str| {
            if slot.is_none() {
                if let Ok(value) = std::env::var(var) {
                    if !value.is_empty() {
                        *slot = Some(value);
                    }
                }
            }
        };
        fill(&mut self.endpoints.completion_url, ENV_COMPLETION_URL);
        fill(&mut self.endpoints.nli_url, ENV_NLI_URL);
        fill(&mut self.endpoints.reward_url, ENV_REWARD_URL);
        fill(&mut self.endpoints.api_key, ENV_API_KEY);
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.task_spec()
            .validate()
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        self.segmentation
            .validate()
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        self.filter.validate().map_err(ConfigError::Invalid)?;
        if self.run.max_in_flight < 1 {
            return Err(ConfigError::Invalid("run.max_in_flight must be at least 1".into()));
        }
        if self.run.n_per_passage < 1 {
            return Err(ConfigError::Invalid("run.n_per_passage must be at least 1".into()));
        }
        if self.endpoints.temperature != 0.0 {
            return Err(ConfigError::Invalid(
                "endpoints.temperature must be 0 (the pipeline decodes greedily)".into(),
            ));
        }
        if self.endpoints.max_new_tokens < 1 {
            return Err(ConfigError::Invalid("endpoints.max_new_tokens must be at least 1".into()));
        }
        if let Some(ts) = &self.run.fixed_timestamp {
            chrono::DateTime::parse_from_rfc3339(ts).map_err(|e| {
                ConfigError::Invalid(format!("run.fixed_timestamp is not RFC 3339: {e}"))
            })?;
        }
        Ok(())
    }

    /// The effective task spec: per-task defaults overridden by the task
    /// section.
    pub fn task_spec(&self) -> TaskSpec {
        let kind = self.task.name.unwrap_or(TaskKind::Qa);
        let mut spec = TaskSpec::for_task(kind);
        if let Some(markers) = &self.task.markers {
            spec.markers = markers.clone();
        }
        if let Some(instruction) = &self.task.instruction {
            spec.instruction_marker_text = Some(instruction.clone());
        }
        if let Some(cap) = self.task.length_ratio_cap {
            spec.length_ratio_cap = cap;
        }
        if let Some(min) = self.task.min_example_words {
            spec.min_example_words = min;
        }
        if let Some(shots) = self.task.shots {
            spec.shots = shots;
        }
        spec
    }

    /// Stop sequences for generation: configured list or the document marker.
    pub fn stop_sequences(&self) -> Vec<String> {
        self.endpoints
            .stop_sequences
            .clone()
            .unwrap_or_else(|| vec![self.task_spec().document_marker().to_owned()])
    }

    /// Hash of the canonical serialization of the fully resolved config.
    ///
    /// `run.resume` and `run.max_in_flight` are excluded: flipping the resume
    /// flag or changing concurrency must not invalidate a checkpoint, since
    /// neither changes what the run produces.
    pub fn config_hash(&self) -> String {
        let mut value = serde_json::to_value(self).expect("config serializes");
        if let Some(run) = value.get_mut("run").and_then(|v| v.as_object_mut()) {
            run.remove("resume");
            run.remove("max_in_flight");
        }
        short_hash(&value.to_string())[..16].to_owned()
    }

    /// Header object embedded as the first line of every output file.
    pub fn header(&self) -> serde_json::Value {
        serde_json::json!({
            "config_hash": self.config_hash(),
            "pipeline_version": crate::PIPELINE_VERSION,
            "config": serde_json::to_value(self).expect("config serializes"),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        let config = PipelineConfig::default();
        assert!(config.validate().is_ok());
        let spec = config.task_spec();
        assert_eq!(spec.shots, 4);
        assert_eq!(spec.markers[0], "[document]");
        assert_eq!(config.stop_sequences(), vec!["[document]".to_owned()]);
    }

    #[test]
    fn toml_round_trip_and_overrides() {
        let raw = r#"
[task]
name = "summarization"
shots = 2
length_ratio_cap = "1/4"

[segmentation]
min_words = 30
max_words = 300

[filter]
entailment_threshold = 0.6

[endpoints]
completion_url = "mock:scripted"
nli_url = "mock:const:0.9"
reward_url = "mock:const:0.9"

[run]
seed = 7
out_dir = "runs/demo"
"#;
        let config: PipelineConfig = toml::from_str(raw).unwrap();
        config.validate().unwrap();
        let spec = config.task_spec();
        assert_eq!(spec.task_name, TaskKind::Summarization);
        assert_eq!(spec.shots, 2);
        assert_eq!(config.filter.entailment_threshold, 0.6);
        assert_eq!(config.run.seed, 7);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let raw = "[task]\nbogus_knob = 3\n";
        assert!(toml::from_str::<PipelineConfig>(raw).is_err());
        let raw = "[unknown_section]\nx = 1\n";
        assert!(toml::from_str::<PipelineConfig>(raw).is_err());
    }

    #[test]
    fn nonzero_temperature_is_rejected() {
        let mut config = PipelineConfig::default();
        config.endpoints.temperature = 0.7;
        assert!(config.validate().is_err());
    }

    #[test]
    fn config_hash_is_stable_and_sensitive() {
        let a = PipelineConfig::default();
        let mut b = PipelineConfig::default();
        assert_eq!(a.config_hash(), b.config_hash());
        b.run.seed = 43;
        assert_ne!(a.config_hash(), b.config_hash());
        assert_eq!(a.config_hash().len(), 16);
    }

    #[test]
    fn resume_and_concurrency_do_not_change_the_hash() {
        let a = PipelineConfig::default();
        let mut b = PipelineConfig::default();
        b.run.resume = true;
        b.run.max_in_flight = 16;
        assert_eq!(a.config_hash(), b.config_hash());
    }

    #[test]
    fn bad_fixed_timestamp_is_rejected() {
        let mut config = PipelineConfig::default();
        config.run.fixed_timestamp = Some("yesterday".into());
        assert!(config.validate().is_err());
        config.run.fixed_timestamp = Some("2024-06-01T00:00:00Z".into());
        assert!(config.validate().is_ok());
    }
}
