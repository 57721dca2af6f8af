//! Deterministic in-process service implementations.
//!
//! These power every test and any offline run: a table-driven completer keyed
//! by prompt hash, a scripted completer that reacts to sentinel words planted
//! in the grounding content, and keyword/constant/length scorers. All of them
//! are also reachable from the config file through `mock:` endpoint specs:
//!
//! ```text
//! completion: mock:scripted | mock:table:<path.json>
//! nli:        mock:const:<v> | mock:keyword:<trigger>:<low>:<high>
//! reward:     mock:const:<v> | mock:keyword:<trigger>:<low>:<high> | mock:length:<words>
//! ```

use std::collections::HashMap;
use std::path::Path;
use std::sync::Arc;

use crate::hash::sha256_hex;
use crate::templates::TaskSpec;
use crate::text;

use super::{
    apply_stop_sequences, CompletionRequest, CompletionService, GatewayError, NliRequest,
    NliService, RewardRequest, RewardService, ScoreResult,
};

/// Sentinel planted in grounding content to make the scripted completer emit
/// a completion with the final marker missing.
pub const SENTINEL_MALFORMED: &str = "zzmalformed";
/// Sentinel copied into the response so a keyword NLI mock scores it low.
pub const SENTINEL_LOW_ENTAILMENT: &str = "zzlowent";
/// Sentinel copied into the response so a keyword reward mock scores it low.
pub const SENTINEL_LOW_REWARD: &str = "zzlowrew";

fn mock_model(name: &str) -> String {
    format!("mock-{name}")
}

/// Canned completions keyed by SHA-256 of the exact prompt text.
pub struct TableCompletion {
    table: HashMap<String, String>,
    default: Option<String>,
}

impl TableCompletion {
    pub fn new(table: HashMap<String, String>) -> Self {
        TableCompletion { table, default: None }
    }

    /// Key each prompt by hash as it is inserted.
    pub fn from_prompts<'a>(pairs: impl IntoIterator<Item = (&'a str, &'a str)>) -> Self {
        let table = pairs
            .into_iter()
            .map(|(prompt, text)| (sha256_hex(prompt), text.to_owned()))
            .collect();
        TableCompletion { table, default: None }
    }

    /// Load a `{sha256(prompt): completion}` JSON object.
    pub fn from_file(path: &Path) -> Result<Self, GatewayError> {
        let raw = std::fs::read_to_string(path)
            .map_err(|e| GatewayError::BadEndpoint(format!("{}: {e}", path.display())))?;
        let table: HashMap<String, String> = serde_json::from_str(&raw)
            .map_err(|e| GatewayError::BadEndpoint(format!("{}: {e}", path.display())))?;
        Ok(TableCompletion { table, default: None })
    }

    pub fn with_default(mut self, text: &str) -> Self {
        self.default = Some(text.to_owned());
        self
    }
}

impl CompletionService for TableCompletion {
    fn complete(&self, req: &CompletionRequest) -> Result<String, GatewayError> {
        req.validate()?;
        let canned = self
            .table
            .get(&sha256_hex(&req.prompt))
            .or(self.default.as_ref())
            .ok_or(GatewayError::MockMiss)?;
        Ok(apply_stop_sequences(canned, &req.stop_sequences))
    }
}

/// Emits a deterministic example for the passage found in the prompt.
///
/// The passage is read back out of the final document block. Sentinel words
/// in it select the behavior: [`SENTINEL_MALFORMED`] drops the final marker,
/// [`SENTINEL_LOW_ENTAILMENT`] / [`SENTINEL_LOW_REWARD`] are copied into the
/// response so keyword scorers can react; anything else produces a clean,
/// well-formed example.
pub struct ScriptedCompletion {
    task: TaskSpec,
}

impl ScriptedCompletion {
    pub fn new(task: TaskSpec) -> Self {
        ScriptedCompletion { task }
    }

    /// The grounding content of the last document block in the prompt.
    fn target_content(&self, prompt: &str) -> Result<String, GatewayError> {
        let marker = self.task.document_marker();
        let start = prompt
            .rfind(marker)
            .ok_or_else(|| GatewayError::InvalidRequest("prompt has no document block".into()))?
            + marker.len();
        let tail = &prompt[start..];
        // the block runs to the trailing cue line
        let end = tail.rfind(&format!("\n{}", self.task.generation_cue())).unwrap_or(tail.len());
        Ok(tail[..end].trim().to_owned())
    }

    fn compose(&self, content: &str) -> String {
        let words = text::words(content);
        let topic = words
            .iter()
            .take(3)
            .map(String::as_str)
            .collect::<Vec<_>>()
            .join(" ");
        let excerpt = words
            .iter()
            .take(18)
            .map(String::as_str)
            .collect::<Vec<_>>()
            .join(" ");

        let markers = self.task.element_markers();
        let mut lines: Vec<String> = Vec::new();
        for (i, marker) in markers.iter().enumerate() {
            let is_last = i + 1 == markers.len();
            let text = if self.task.is_instruction_marker(marker) {
                self.task.instruction_marker_text.clone().unwrap_or_default()
            } else if !is_last {
                format!("What does the passage about {topic} describe?")
            } else {
                let mut prefix = String::new();
                if content.contains(SENTINEL_LOW_ENTAILMENT) {
                    prefix = format!("{SENTINEL_LOW_ENTAILMENT} ");
                } else if content.contains(SENTINEL_LOW_REWARD) {
                    prefix = format!("{SENTINEL_LOW_REWARD} ");
                }
                format!("{prefix}The passage explains that {excerpt}.")
            };
            if is_last && content.contains(SENTINEL_MALFORMED) {
                break; // drop the final marker entirely
            }
            lines.push(format!("{marker} {text}"));
        }
        // the first marker is the cue already present in the prompt
        let rendered = lines.join("\n");
        rendered
            .strip_prefix(self.task.generation_cue())
            .unwrap_or(&rendered)
            .to_owned()
    }
}

impl CompletionService for ScriptedCompletion {
    fn complete(&self, req: &CompletionRequest) -> Result<String, GatewayError> {
        req.validate()?;
        let content = self.target_content(&req.prompt)?;
        Ok(apply_stop_sequences(&self.compose(&content), &req.stop_sequences))
    }
}

/// Fixed NLI score.
pub struct ConstNli(pub f64);

impl NliService for ConstNli {
    fn score_nli(&self, req: &NliRequest) -> Result<ScoreResult, GatewayError> {
        req.validate()?;
        Ok(ScoreResult {
            value: self.0,
            model_id: mock_model("nli-const"),
            latency_ms: 0,
        })
    }
}

/// Low score when the hypothesis contains the trigger word, high otherwise;
/// identical premise and hypothesis always score 1.0.
pub struct KeywordNli {
    pub trigger: String,
    pub low: f64,
    pub high: f64,
}

impl NliService for KeywordNli {
    fn score_nli(&self, req: &NliRequest) -> Result<ScoreResult, GatewayError> {
        req.validate()?;
        let value = if req.premise == req.hypothesis {
            1.0
        } else if req.hypothesis.contains(&self.trigger) {
            self.low
        } else {
            self.high
        };
        Ok(ScoreResult {
            value,
            model_id: mock_model("nli-keyword"),
            latency_ms: 0,
        })
    }
}

/// Arbitrary closure-backed NLI mock for tests.
pub struct FnNli<F: Fn(&NliRequest) -> f64 + Send + Sync>(pub F);

impl<F: Fn(&NliRequest) -> f64 + Send + Sync> NliService for FnNli<F> {
    fn score_nli(&self, req: &NliRequest) -> Result<ScoreResult, GatewayError> {
        req.validate()?;
        Ok(ScoreResult {
            value: (self.0)(req),
            model_id: mock_model("nli-fn"),
            latency_ms: 0,
        })
    }
}

/// Fixed reward score.
pub struct ConstReward(pub f64);

impl RewardService for ConstReward {
    fn score_reward(&self, req: &RewardRequest) -> Result<ScoreResult, GatewayError> {
        req.validate()?;
        Ok(ScoreResult {
            value: self.0,
            model_id: mock_model("reward-const"),
            latency_ms: 0,
        })
    }
}

/// Low score when the response contains the trigger word, high otherwise.
pub struct KeywordReward {
    pub trigger: String,
    pub low: f64,
    pub high: f64,
}

impl RewardService for KeywordReward {
    fn score_reward(&self, req: &RewardRequest) -> Result<ScoreResult, GatewayError> {
        req.validate()?;
        let value = if req.response.contains(&self.trigger) {
            self.low
        } else {
            self.high
        };
        Ok(ScoreResult {
            value,
            model_id: mock_model("reward-keyword"),
            latency_ms: 0,
        })
    }
}

/// Length-scaled score: `min(1, response_words / scale)`.
pub struct LengthReward {
    pub scale: usize,
}

impl RewardService for LengthReward {
    fn score_reward(&self, req: &RewardRequest) -> Result<ScoreResult, GatewayError> {
        req.validate()?;
        let words = text::word_count(&req.response);
        Ok(ScoreResult {
            value: (words as f64 / self.scale.max(1) as f64).min(1.0),
            model_id: mock_model("reward-length"),
            latency_ms: 0,
        })
    }
}

/// Arbitrary closure-backed reward mock for tests.
pub struct FnReward<F: Fn(&RewardRequest) -> f64 + Send + Sync>(pub F);

impl<F: Fn(&RewardRequest) -> f64 + Send + Sync> RewardService for FnReward<F> {
    fn score_reward(&self, req: &RewardRequest) -> Result<ScoreResult, GatewayError> {
        req.validate()?;
        Ok(ScoreResult {
            value: (self.0)(req),
            model_id: mock_model("reward-fn"),
            latency_ms: 0,
        })
    }
}

pub fn is_mock_spec(spec: &str) -> bool {
    spec.starts_with("mock:")
}

/// Build a completion service from a `mock:` endpoint spec, or `None` when
/// the spec is a plain URL.
pub fn completion_from_spec(
    spec: &str,
    task: &TaskSpec,
) -> Result<Option<Arc<dyn CompletionService>>, GatewayError> {
    if !is_mock_spec(spec) {
        return Ok(None);
    }
    let rest = &spec["mock:".len()..];
    if rest == "scripted" {
        return Ok(Some(Arc::new(ScriptedCompletion::new(task.clone()))));
    }
    if let Some(path) = rest.strip_prefix("table:") {
        return Ok(Some(Arc::new(TableCompletion::from_file(Path::new(path))?)));
    }
    Err(GatewayError::BadEndpoint(spec.to_owned()))
}

fn parse_keyword(rest: &str, spec: &str) -> Result<(String, f64, f64), GatewayError> {
    let parts: Vec<&str> = rest.split(':').collect();
    if parts.len() != 3 {
        return Err(GatewayError::BadEndpoint(spec.to_owned()));
    }
    let low: f64 = parts[1].parse().map_err(|_| GatewayError::BadEndpoint(spec.to_owned()))?;
    let high: f64 = parts[2].parse().map_err(|_| GatewayError::BadEndpoint(spec.to_owned()))?;
    Ok((parts[0].to_owned(), low, high))
}

/// Build an NLI service from a `mock:` endpoint spec.
pub fn nli_from_spec(spec: &str) -> Result<Option<Arc<dyn NliService>>, GatewayError> {
    if !is_mock_spec(spec) {
        return Ok(None);
    }
    let rest = &spec["mock:".len()..];
    if let Some(v) = rest.strip_prefix("const:") {
        let value: f64 = v.parse().map_err(|_| GatewayError::BadEndpoint(spec.to_owned()))?;
        return Ok(Some(Arc::new(ConstNli(value))));
    }
    if let Some(kw) = rest.strip_prefix("keyword:") {
        let (trigger, low, high) = parse_keyword(kw, spec)?;
        return Ok(Some(Arc::new(KeywordNli { trigger, low, high })));
    }
    Err(GatewayError::BadEndpoint(spec.to_owned()))
}

/// Build a reward service from a `mock:` endpoint spec.
pub fn reward_from_spec(spec: &str) -> Result<Option<Arc<dyn RewardService>>, GatewayError> {
    if !is_mock_spec(spec) {
        return Ok(None);
    }
    let rest = &spec["mock:".len()..];
    if let Some(v) = rest.strip_prefix("const:") {
        let value: f64 = v.parse().map_err(|_| GatewayError::BadEndpoint(spec.to_owned()))?;
        return Ok(Some(Arc::new(ConstReward(value))));
    }
    if let Some(kw) = rest.strip_prefix("keyword:") {
        let (trigger, low, high) = parse_keyword(kw, spec)?;
        return Ok(Some(Arc::new(KeywordReward { trigger, low, high })));
    }
    if let Some(v) = rest.strip_prefix("length:") {
        let scale: usize = v.parse().map_err(|_| GatewayError::BadEndpoint(spec.to_owned()))?;
        return Ok(Some(Arc::new(LengthReward { scale })));
    }
    Err(GatewayError::BadEndpoint(spec.to_owned()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::templates::{build_prompt, default_exemplars};

    fn completion_req(prompt: &str) -> CompletionRequest {
        CompletionRequest {
            prompt: prompt.to_owned(),
            max_new_tokens: 256,
            temperature: 0.0,
            stop_sequences: vec![],
        }
    }

    #[test]
    fn table_returns_canned_text_byte_exactly() {
        let mock = TableCompletion::from_prompts([("the prompt", " canned [answer] text")]);
        let got = mock.complete(&completion_req("the prompt")).unwrap();
        assert_eq!(got, " canned [answer] text");
        assert!(matches!(
            mock.complete(&completion_req("unknown")),
            Err(GatewayError::MockMiss)
        ));
    }

    #[test]
    fn scripted_reads_the_target_passage_back_out_of_the_prompt() {
        let task = TaskSpec::qa();
        let exemplars = default_exemplars(&task).unwrap();
        let prompt = build_prompt(&task, &exemplars, "The copper mine opened in 1901 and employed four hundred workers at its peak.").unwrap();
        let mock = ScriptedCompletion::new(task.clone());
        let completion = mock.complete(&completion_req(&prompt.text)).unwrap();
        assert!(completion.contains("[answer]"), "completion: {completion}");
        assert!(completion.contains("copper mine"), "completion: {completion}");
        assert!(!completion.starts_with("[question]"));
    }

    #[test]
    fn scripted_sentinels_select_behaviors() {
        let task = TaskSpec::qa();
        let exemplars = default_exemplars(&task).unwrap();
        let mock = ScriptedCompletion::new(task.clone());

        let p = build_prompt(&task, &exemplars, "Plain content without any markers in it.").unwrap();
        let clean = mock.complete(&completion_req(&p.text)).unwrap();
        assert!(clean.contains("[answer]"));

        let p = build_prompt(&task, &exemplars, "Content hiding zzmalformed deep inside the text.").unwrap();
        let malformed = mock.complete(&completion_req(&p.text)).unwrap();
        assert!(!malformed.contains("[answer]"));

        let p = build_prompt(&task, &exemplars, "Content that mentions zzlowent somewhere later.").unwrap();
        let lowent = mock.complete(&completion_req(&p.text)).unwrap();
        assert!(lowent.contains("zzlowent"));
    }

    #[test]
    fn keyword_nli_reacts_to_trigger_and_identity() {
        let nli = KeywordNli { trigger: "zzlowent".into(), low: 0.1, high: 0.9 };
        let same = NliRequest { premise: "The sky is blue.".into(), hypothesis: "The sky is blue.".into() };
        assert_eq!(nli.score_nli(&same).unwrap().value, 1.0);
        let bad = NliRequest { premise: "content".into(), hypothesis: "zzlowent answer".into() };
        assert_eq!(nli.score_nli(&bad).unwrap().value, 0.1);
        let good = NliRequest { premise: "content".into(), hypothesis: "clean answer".into() };
        assert_eq!(nli.score_nli(&good).unwrap().value, 0.9);
    }

    #[test]
    fn length_reward_is_deterministic() {
        let reward = LengthReward { scale: 10 };
        let req = RewardRequest { instruction: "q".into(), response: "one two three four five".into() };
        assert_eq!(reward.score_reward(&req).unwrap().value, 0.5);
    }

    #[test]
    fn empty_reward_response_fails_before_scoring() {
        let reward = ConstReward(0.9);
        let req = RewardRequest { instruction: "q".into(), response: "  ".into() };
        assert!(matches!(
            reward.score_reward(&req),
            Err(GatewayError::InvalidRequest(_))
        ));
    }

    #[test]
    fn spec_strings_build_the_right_mocks() {
        let task = TaskSpec::qa();
        assert!(completion_from_spec("mock:scripted", &task).unwrap().is_some());
        assert!(completion_from_spec("http://host/v1", &task).unwrap().is_none());
        assert!(completion_from_spec("mock:bogus", &task).is_err());
        assert!(nli_from_spec("mock:const:0.8").unwrap().is_some());
        assert!(nli_from_spec("mock:keyword:zz:0.1:0.9").unwrap().is_some());
        assert!(reward_from_spec("mock:length:20").unwrap().is_some());
        assert!(reward_from_spec("mock:keyword:bad").is_err());
    }
}
