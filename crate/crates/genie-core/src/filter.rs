//! The three quality gates: format, faithfulness, quality.
//!
//! Gates run in configured order with short-circuit on the first reject, so
//! the cheap deterministic format check always precedes paid scoring calls.
//! Boundary semantics are uniform: scores strictly below a threshold reject,
//! lengths strictly above a cap reject; equality keeps.

use serde::{Deserialize, Serialize};

use crate::gateway::{map_batched, NliRequest, NliService, RewardRequest, RewardService};
use crate::pipeline::GenerationRecord;
use crate::templates::{Ratio, TaskSpec};
use crate::text;

/// Which gate produced a verdict.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Gate {
    Format,
    Faithfulness,
    Quality,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Decision {
    Keep,
    Reject,
}

/// Machine-readable verdict reason.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Reason {
    Ok,
    MissingMarker,
    EmptyElement,
    OutOfOrder,
    TooShort,
    TooLong,
    BelowEntailmentThreshold,
    BelowRewardThreshold,
    ScoringError,
}

/// One gate's keep/reject decision.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FilterVerdict {
    pub gate: Gate,
    pub decision: Decision,
    pub reason: Reason,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub score: Option<f64>,
}

impl FilterVerdict {
    fn keep(gate: Gate, score: Option<f64>) -> FilterVerdict {
        FilterVerdict { gate, decision: Decision::Keep, reason: Reason::Ok, score }
    }

    fn reject(gate: Gate, reason: Reason, score: Option<f64>) -> FilterVerdict {
        FilterVerdict { gate, decision: Decision::Reject, reason, score }
    }
}

/// What to do with a record when a scoring service fails after retries.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScoringErrorPolicy {
    /// Quality guarantees outrank yield.
    #[default]
    Reject,
    KeepFlagged,
}

/// How the NLI hypothesis is rendered from a parsed example.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HypothesisMode {
    /// All generated elements joined in marker order, markers stripped.
    #[default]
    FullExample,
    /// Only the response element (answer/summary).
    AnswerOnly,
}

/// Filter thresholds and policy.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FilterConfig {
    pub min_example_words: usize,
    /// Overrides the task's cap when set.
    pub length_ratio_cap: Option<Ratio>,
    pub entailment_threshold: f64,
    pub reward_threshold: f64,
    pub gate_order: Vec<Gate>,
    pub on_scoring_error: ScoringErrorPolicy,
    pub nli_hypothesis: HypothesisMode,
    /// Concurrent scoring calls issued by `run_chain`.
    pub max_in_flight: usize,
}

impl Default for FilterConfig {
    fn default() -> Self {
        FilterConfig {
            min_example_words: 10,
            length_ratio_cap: None,
            entailment_threshold: 0.5,
            reward_threshold: 0.5,
            gate_order: vec![Gate::Format, Gate::Faithfulness, Gate::Quality],
            on_scoring_error: ScoringErrorPolicy::Reject,
            nli_hypothesis: HypothesisMode::FullExample,
            max_in_flight: 4,
        }
    }
}

impl FilterConfig {
    pub fn validate(&self) -> Result<(), String> {
        if !(0.0..=1.0).contains(&self.entailment_threshold)
            || !(0.0..=1.0).contains(&self.reward_threshold)
        {
            return Err("thresholds must lie in [0, 1]".into());
        }
        if self.min_example_words < 1 {
            return Err("min_example_words must be at least 1".into());
        }
        if self.gate_order.is_empty() {
            return Err("gate_order must not be empty".into());
        }
        Ok(())
    }

    fn effective_cap(&self, task: &TaskSpec) -> Ratio {
        self.length_ratio_cap.unwrap_or(task.length_ratio_cap)
    }
}

/// Deterministic format gate: parse result, minimum length, length cap.
///
/// Word counts cover only the generated payload (the fixed instruction
/// element is template boilerplate), measured against the grounding content.
pub fn format_gate(record: &GenerationRecord, cfg: &FilterConfig, task: &TaskSpec) -> FilterVerdict {
    let example = match record.parse_result() {
        Err(fe) => {
            let reason = match fe {
                crate::templates::FormatError::MissingMarker(_) => Reason::MissingMarker,
                crate::templates::FormatError::EmptyElement(_) => Reason::EmptyElement,
                crate::templates::FormatError::OutOfOrderMarkers => Reason::OutOfOrder,
            };
            return FilterVerdict::reject(Gate::Format, reason, None);
        }
        Ok(example) => example,
    };
    let generated_words = example.payload_word_count(task);
    if generated_words < cfg.min_example_words {
        return FilterVerdict::reject(Gate::Format, Reason::TooShort, None);
    }
    let content_words = text::word_count(&record.passage.text);
    if cfg.effective_cap(task).exceeded_by(generated_words, content_words) {
        return FilterVerdict::reject(Gate::Format, Reason::TooLong, None);
    }
    FilterVerdict::keep(Gate::Format, None)
}

/// NLI faithfulness gate: grounding content as premise, generated example as
/// hypothesis; keep iff score >= threshold.
pub fn faithfulness_gate(
    record: &GenerationRecord,
    cfg: &FilterConfig,
    task: &TaskSpec,
    nli: &dyn NliService,
) -> FilterVerdict {
    let example = match record.parse_result() {
        Ok(e) => e,
        Err(_) => return FilterVerdict::reject(Gate::Faithfulness, Reason::ScoringError, None),
    };
    let hypothesis = match cfg.nli_hypothesis {
        HypothesisMode::FullExample => example.payload_text(task),
        HypothesisMode::AnswerOnly => example.response_text().to_owned(),
    };
    let request = NliRequest {
        premise: record.passage.text.clone(),
        hypothesis,
    };
    match nli.score_nli(&request) {
        Ok(score) => {
            if score.value >= cfg.entailment_threshold {
                FilterVerdict::keep(Gate::Faithfulness, Some(score.value))
            } else {
                FilterVerdict::reject(
                    Gate::Faithfulness,
                    Reason::BelowEntailmentThreshold,
                    Some(score.value),
                )
            }
        }
        Err(_) => {
            let decision = match cfg.on_scoring_error {
                ScoringErrorPolicy::Reject => Decision::Reject,
                ScoringErrorPolicy::KeepFlagged => Decision::Keep,
            };
            FilterVerdict {
                gate: Gate::Faithfulness,
                decision,
                reason: Reason::ScoringError,
                score: None,
            }
        }
    }
}

/// Reward quality gate: instruction/response pair scored by the reward
/// service; keep iff score >= threshold (a score of exactly 0.5 keeps).
pub fn quality_gate(
    record: &GenerationRecord,
    cfg: &FilterConfig,
    task: &TaskSpec,
    reward: &dyn RewardService,
) -> FilterVerdict {
    let example = match record.parse_result() {
        Ok(e) => e,
        Err(_) => return FilterVerdict::reject(Gate::Quality, Reason::ScoringError, None),
    };
    let request = RewardRequest {
        instruction: example.instruction_text(task),
        response: example.response_text().to_owned(),
    };
    match reward.score_reward(&request) {
        Ok(score) => {
            if score.value >= cfg.reward_threshold {
                FilterVerdict::keep(Gate::Quality, Some(score.value))
            } else {
                FilterVerdict::reject(Gate::Quality, Reason::BelowRewardThreshold, Some(score.value))
            }
        }
        Err(_) => {
            let decision = match cfg.on_scoring_error {
                ScoringErrorPolicy::Reject => Decision::Reject,
                ScoringErrorPolicy::KeepFlagged => Decision::Keep,
            };
            FilterVerdict { gate: Gate::Quality, decision, reason: Reason::ScoringError, score: None }
        }
    }
}

/// Chain output: every input record lands in exactly one list, carrying its
/// verdict trail up to and including the deciding verdict.
#[derive(Debug)]
pub struct ChainOutcome {
    pub kept: Vec<GenerationRecord>,
    pub rejected: Vec<GenerationRecord>,
}

/// Run the gates over all records in `cfg.gate_order` with short-circuit.
///
/// Scoring gates fan out through [`map_batched`]; verdicts are committed in
/// input order regardless of completion order.
pub fn run_chain(
    records: Vec<GenerationRecord>,
    cfg: &FilterConfig,
    task: &TaskSpec,
    nli: &dyn NliService,
    reward: &dyn RewardService,
) -> ChainOutcome {
    let mut kept: Vec<(usize, GenerationRecord)> = records.into_iter().enumerate().collect();
    let mut rejected: Vec<(usize, GenerationRecord)> = Vec::new();

    for gate in &cfg.gate_order {
        let verdicts: Vec<FilterVerdict> = match gate {
            Gate::Format => kept
                .iter()
                .map(|(_, r)| format_gate(r, cfg, task))
                .collect(),
            Gate::Faithfulness => map_batched(&kept, cfg.max_in_flight.max(1), |(_, r)| {
                faithfulness_gate(r, cfg, task, nli)
            }),
            Gate::Quality => map_batched(&kept, cfg.max_in_flight.max(1), |(_, r)| {
                quality_gate(r, cfg, task, reward)
            }),
        };

        let mut survivors = Vec::with_capacity(kept.len());
        for ((index, mut record), verdict) in kept.into_iter().zip(verdicts) {
            match verdict.gate {
                Gate::Faithfulness => record.scores.entailment = verdict.score,
                Gate::Quality => record.scores.reward = verdict.score,
                Gate::Format => {}
            }
            record.verdicts.push(verdict);
            if verdict.decision == Decision::Keep {
                survivors.push((index, record));
            } else {
                rejected.push((index, record));
            }
        }
        kept = survivors;
    }

    rejected.sort_by_key(|(i, _)| *i);
    ChainOutcome {
        kept: kept.into_iter().map(|(_, r)| r).collect(),
        rejected: rejected.into_iter().map(|(_, r)| r).collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gateway::mock::{ConstNli, ConstReward, FnNli, FnReward};
    use crate::gateway::{GatewayError, ScoreResult};
    use crate::pipeline::test_support::record_with;
    use std::sync::atomic::{AtomicUsize, Ordering};

    fn n_words(n: usize) -> String {
        (0..n).map(|i| format!("w{i}")).collect::<Vec<_>>().join(" ")
    }

    #[test]
    fn parse_failures_map_to_format_reasons() {
        let task = TaskSpec::qa();
        let cfg = FilterConfig::default();
        let record = record_with(&n_words(100), None, None);
        let verdict = format_gate(&record, &cfg, &task);
        assert_eq!(verdict.decision, Decision::Reject);
        assert_eq!(verdict.reason, Reason::MissingMarker);
    }

    #[test]
    fn nine_word_example_is_too_short() {
        let task = TaskSpec::qa();
        let cfg = FilterConfig::default();
        // question parses to 0 words (markdown syntax only), answer has 9
        let record = record_with(&n_words(100), Some("*"), Some(&n_words(9)));
        let verdict = format_gate(&record, &cfg, &task);
        assert_eq!(verdict.reason, Reason::TooShort);
    }

    #[test]
    fn ten_word_example_passes_the_length_floor() {
        let task = TaskSpec::qa();
        let cfg = FilterConfig::default();
        let record = record_with(&n_words(100), Some(&n_words(4)), Some(&n_words(6)));
        let verdict = format_gate(&record, &cfg, &task);
        assert_eq!(verdict.decision, Decision::Keep);
    }

    #[test]
    fn qa_cap_rejects_strictly_above_one_and_a_half() {
        let task = TaskSpec::qa();
        let cfg = FilterConfig::default();
        // content 100 words -> cap 150
        let at_cap = record_with(&n_words(100), Some(&n_words(50)), Some(&n_words(100)));
        assert_eq!(format_gate(&at_cap, &cfg, &task).decision, Decision::Keep);
        let over_cap = record_with(&n_words(100), Some(&n_words(50)), Some(&n_words(101)));
        let verdict = format_gate(&over_cap, &cfg, &task);
        assert_eq!(verdict.reason, Reason::TooLong);
    }

    #[test]
    fn summarization_boundary_keeps_at_exactly_quarter() {
        use crate::pipeline::test_support::summarization_record_with;
        let task = TaskSpec::summarization();
        let cfg = FilterConfig::default();
        // content 200 words -> cap 50; instruction element is not counted
        let keep = summarization_record_with(&n_words(200), &n_words(50));
        assert_eq!(format_gate(&keep, &cfg, &task).decision, Decision::Keep);
        let reject = summarization_record_with(&n_words(200), &n_words(51));
        assert_eq!(format_gate(&reject, &cfg, &task).reason, Reason::TooLong);
    }

    #[test]
    fn faithfulness_thresholds_are_inclusive_on_keep() {
        let task = TaskSpec::qa();
        let cfg = FilterConfig::default();
        let record = record_with(&n_words(100), Some("A question?"), Some(&n_words(20)));

        let keep = faithfulness_gate(&record, &cfg, &task, &ConstNli(0.92));
        assert_eq!(keep.decision, Decision::Keep);
        assert_eq!(keep.score, Some(0.92));

        let at = faithfulness_gate(&record, &cfg, &task, &ConstNli(0.5));
        assert_eq!(at.decision, Decision::Keep);

        let below = faithfulness_gate(&record, &cfg, &task, &ConstNli(0.49));
        assert_eq!(below.decision, Decision::Reject);
        assert_eq!(below.reason, Reason::BelowEntailmentThreshold);
    }

    #[test]
    fn reward_boundary_keeps_half_rejects_below() {
        let task = TaskSpec::qa();
        let cfg = FilterConfig::default();
        let record = record_with(&n_words(100), Some("A question?"), Some(&n_words(20)));

        let at = quality_gate(&record, &cfg, &task, &ConstReward(0.5));
        assert_eq!(at.decision, Decision::Keep);
        let below = quality_gate(&record, &cfg, &task, &ConstReward(0.499));
        assert_eq!(below.decision, Decision::Reject);
        assert_eq!(below.reason, Reason::BelowRewardThreshold);
    }

    #[test]
    fn scoring_failure_follows_the_configured_policy() {
        struct DownNli;
        impl NliService for DownNli {
            fn score_nli(&self, _: &NliRequest) -> Result<ScoreResult, GatewayError> {
                Err(GatewayError::Timeout { attempts: 5 })
            }
        }
        let task = TaskSpec::qa();
        let record = record_with(&n_words(100), Some("Q?"), Some(&n_words(20)));

        let cfg = FilterConfig::default();
        let verdict = faithfulness_gate(&record, &cfg, &task, &DownNli);
        assert_eq!(verdict.decision, Decision::Reject);
        assert_eq!(verdict.reason, Reason::ScoringError);

        let mut keep_cfg = FilterConfig::default();
        keep_cfg.on_scoring_error = ScoringErrorPolicy::KeepFlagged;
        let verdict = faithfulness_gate(&record, &keep_cfg, &task, &DownNli);
        assert_eq!(verdict.decision, Decision::Keep);
        assert_eq!(verdict.reason, Reason::ScoringError);
    }

    #[test]
    fn chain_partitions_with_reason_counts() {
        let task = TaskSpec::qa();
        let cfg = FilterConfig::default();
        // 10 records: 2 parse failures, 3 low-entailment, 1 low-reward, 4 clean
        let mut records = Vec::new();
        for i in 0..10 {
            let (question, answer) = match i {
                0 | 1 => (None, None),
                2 | 3 | 4 => (Some("Q?"), Some("lowent answer padded to be long enough for the floor yes")),
                5 => (Some("Q?"), Some("lowrew answer padded to be long enough for the floor yes")),
                _ => (Some("Q?"), Some("clean answer padded to be long enough for the floor yes")),
            };
            records.push(record_with(&n_words(100), question, answer));
        }
        let nli = FnNli(|req: &NliRequest| if req.hypothesis.contains("lowent") { 0.2 } else { 0.9 });
        let reward =
            FnReward(|req: &RewardRequest| if req.response.contains("lowrew") { 0.2 } else { 0.9 });
        let outcome = run_chain(records, &cfg, &task, &nli, &reward);

        assert_eq!(outcome.kept.len(), 4);
        assert_eq!(outcome.rejected.len(), 6);
        let count = |reason: Reason| {
            outcome
                .rejected
                .iter()
                .filter(|r| r.verdicts.last().unwrap().reason == reason)
                .count()
        };
        assert_eq!(count(Reason::MissingMarker), 2);
        assert_eq!(count(Reason::BelowEntailmentThreshold), 3);
        assert_eq!(count(Reason::BelowRewardThreshold), 1);
        for record in &outcome.kept {
            assert_eq!(record.verdicts.len(), 3);
            assert!(record.verdicts.iter().all(|v| v.decision == Decision::Keep));
            assert!(record.scores.entailment.is_some());
            assert!(record.scores.reward.is_some());
        }
    }

    #[test]
    fn empty_chain_input_gives_empty_outputs() {
        let task = TaskSpec::qa();
        let cfg = FilterConfig::default();
        let outcome = run_chain(Vec::new(), &cfg, &task, &ConstNli(1.0), &ConstReward(1.0));
        assert!(outcome.kept.is_empty());
        assert!(outcome.rejected.is_empty());
    }

    #[test]
    fn all_pass_preserves_input_order() {
        let task = TaskSpec::qa();
        let cfg = FilterConfig::default();
        let records: Vec<_> = (0..8)
            .map(|i| {
                record_with(
                    &format!("content {i} {}", n_words(60)),
                    Some("Q?"),
                    Some(&n_words(15)),
                )
            })
            .collect();
        let ids: Vec<String> = records.iter().map(|r| r.passage.passage_id.clone()).collect();
        let outcome = run_chain(records, &cfg, &task, &ConstNli(0.9), &ConstReward(0.9));
        let kept_ids: Vec<String> =
            outcome.kept.iter().map(|r| r.passage.passage_id.clone()).collect();
        assert_eq!(kept_ids, ids);
    }

    #[test]
    fn format_rejects_never_reach_scoring_services() {
        struct CountingNli(AtomicUsize);
        impl NliService for CountingNli {
            fn score_nli(&self, req: &NliRequest) -> Result<ScoreResult, GatewayError> {
                self.0.fetch_add(1, Ordering::SeqCst);
                req.validate()?;
                Ok(ScoreResult { value: 0.9, model_id: "c".into(), latency_ms: 0 })
            }
        }
        struct CountingReward(AtomicUsize);
        impl RewardService for CountingReward {
            fn score_reward(&self, req: &RewardRequest) -> Result<ScoreResult, GatewayError> {
                self.0.fetch_add(1, Ordering::SeqCst);
                req.validate()?;
                Ok(ScoreResult { value: 0.9, model_id: "c".into(), latency_ms: 0 })
            }
        }
        let task = TaskSpec::qa();
        let cfg = FilterConfig::default();
        let records = vec![
            record_with(&n_words(50), None, None),
            record_with(&n_words(50), Some("*"), Some("short")),
        ];
        let nli = CountingNli(AtomicUsize::new(0));
        let reward = CountingReward(AtomicUsize::new(0));
        let outcome = run_chain(records, &cfg, &task, &nli, &reward);
        assert_eq!(outcome.kept.len(), 0);
        assert_eq!(nli.0.load(Ordering::SeqCst), 0);
        assert_eq!(reward.0.load(Ordering::SeqCst), 0);
    }

    #[test]
    fn raising_thresholds_never_grows_the_kept_set() {
        let task = TaskSpec::qa();
        let nli = FnNli(|req: &NliRequest| {
            // deterministic pseudo-score from the hypothesis text
            let h = crate::hash::sha256_hex(&req.hypothesis);
            u32::from_str_radix(&h[..4], 16).unwrap() as f64 / 65535.0
        });
        let reward = FnReward(|req: &RewardRequest| {
            let h = crate::hash::sha256_hex(&req.response);
            u32::from_str_radix(&h[4..8], 16).unwrap() as f64 / 65535.0
        });
        let make_records = || -> Vec<GenerationRecord> {
            (0..30)
                .map(|i| {
                    record_with(
                        &n_words(80),
                        Some(&format!("Question number {i}?")),
                        Some(&format!("Answer body {i} {}", n_words(12))),
                    )
                })
                .collect()
        };
        let mut previous = usize::MAX;
        for threshold in [0.0, 0.25, 0.5, 0.75, 1.0] {
            let mut cfg = FilterConfig::default();
            cfg.entailment_threshold = threshold;
            cfg.reward_threshold = threshold;
            let outcome = run_chain(make_records(), &cfg, &task, &nli, &reward);
            assert!(outcome.kept.len() <= previous);
            previous = outcome.kept.len();
        }
    }
}
