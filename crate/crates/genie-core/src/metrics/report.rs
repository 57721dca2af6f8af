//! Per-example and aggregate metric reports, plus dataset statistics.

use serde::{Deserialize, Serialize};

use crate::gateway::{map_batched, NliRequest, NliService, RewardRequest, RewardService};
use crate::store::DatasetRecord;
use crate::text;

use super::{k_precision, rouge_l, vocd_d, MetricsError, RougeScore, VocdConfig};

/// Which external scorer columns to fill.
#[derive(Debug, Clone, Copy, Default, Serialize, Deserialize)]
pub struct EvalOptions {
    pub use_reward: bool,
    pub use_nli: bool,
}

/// Scores for one prediction.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExampleScores {
    pub rouge_l: RougeScore,
    pub k_precision: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reward: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub entailment: Option<f64>,
}

/// Arithmetic means over the per-example scores.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AggregateScores {
    pub rouge_l: RougeScore,
    pub k_precision: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reward: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub entailment: Option<f64>,
}

/// Full evaluation report.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MetricReport {
    pub n: usize,
    pub aggregate: AggregateScores,
    pub per_example: Vec<ExampleScores>,
    /// Fixed method choices, recorded so numbers stay comparable.
    pub metadata: ReportMetadata,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReportMetadata {
    pub rouge_variant: String,
    pub tokenizer: String,
}

impl Default for ReportMetadata {
    fn default() -> Self {
        ReportMetadata {
            rouge_variant: "rouge-l summary-level, no stemming, no stopword removal".into(),
            tokenizer: "unicode-whitespace words after markdown-syntax stripping".into(),
        }
    }
}

/// Score aligned predictions against references and grounding contents.
///
/// ROUGE-L compares prediction to reference; K-Precision compares prediction
/// to content. When enabled, the entailment column scores content ⊨
/// prediction and the reward column scores the prediction as a response to
/// its grounding content. Predictions with no scoreable tokens take
/// K-Precision 0.
pub fn eval_predictions(
    preds: &[String],
    golds: &[String],
    contents: &[String],
    options: &EvalOptions,
    nli: Option<&dyn NliService>,
    reward: Option<&dyn RewardService>,
    max_in_flight: usize,
) -> Result<MetricReport, MetricsError> {
    if preds.len() != golds.len() || preds.len() != contents.len() {
        return Err(MetricsError::LengthMismatch {
            preds: preds.len(),
            golds: golds.len(),
            contents: contents.len(),
        });
    }
    if preds.is_empty() {
        return Err(MetricsError::EmptyDataset);
    }

    let entailment: Vec<Option<f64>> = if options.use_nli {
        let nli = nli.ok_or(MetricsError::ScorerMissing("nli"))?;
        let pairs: Vec<(usize, &String)> = preds.iter().enumerate().collect();
        map_batched(&pairs, max_in_flight.max(1), |(i, pred)| {
            nli.score_nli(&NliRequest {
                premise: contents[*i].clone(),
                hypothesis: (*pred).clone(),
            })
            .ok()
            .map(|s| s.value)
        })
    } else {
        vec![None; preds.len()]
    };

    let reward_scores: Vec<Option<f64>> = if options.use_reward {
        let reward = reward.ok_or(MetricsError::ScorerMissing("reward"))?;
        let pairs: Vec<(usize, &String)> = preds.iter().enumerate().collect();
        map_batched(&pairs, max_in_flight.max(1), |(i, pred)| {
            reward
                .score_reward(&RewardRequest {
                    instruction: contents[*i].clone(),
                    response: (*pred).clone(),
                })
                .ok()
                .map(|s| s.value)
        })
    } else {
        vec![None; preds.len()]
    };

    let mut per_example = Vec::with_capacity(preds.len());
    for i in 0..preds.len() {
        per_example.push(ExampleScores {
            rouge_l: rouge_l(&preds[i], &golds[i]),
            k_precision: k_precision(&preds[i], &contents[i]).unwrap_or(0.0),
            reward: reward_scores[i],
            entailment: entailment[i],
        });
    }

    let n = per_example.len() as f64;
    let mean = |f: &dyn Fn(&ExampleScores) -> f64| per_example.iter().map(|e| f(e)).sum::<f64>() / n;
    let mean_opt = |f: &dyn Fn(&ExampleScores) -> Option<f64>| -> Option<f64> {
        let values: Vec<f64> = per_example.iter().filter_map(|e| f(e)).collect();
        if values.is_empty() {
            None
        } else {
            Some(values.iter().sum::<f64>() / values.len() as f64)
        }
    };
    let aggregate = AggregateScores {
        rouge_l: RougeScore {
            precision: mean(&|e| e.rouge_l.precision),
            recall: mean(&|e| e.rouge_l.recall),
            f1: mean(&|e| e.rouge_l.f1),
        },
        k_precision: mean(&|e| e.k_precision),
        reward: mean_opt(&|e| e.reward),
        entailment: mean_opt(&|e| e.entailment),
    };

    Ok(MetricReport {
        n: per_example.len(),
        aggregate,
        per_example,
        metadata: ReportMetadata::default(),
    })
}

/// Whether lexical diversity pools all responses or averages per-response
/// fits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DiversityMode {
    #[default]
    Pooled,
    PerResponseMean,
}

/// Dataset-level statistics: sample count, mean response length, lexical
/// diversity.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DatasetStats {
    pub n_samples: usize,
    pub mean_response_words: f64,
    /// vocd-D; `None` when the text is too short to sample.
    pub lexical_diversity: Option<f64>,
    pub diversity_mode: DiversityMode,
}

pub fn dataset_stats(
    records: &[DatasetRecord],
    vocd_cfg: &VocdConfig,
    mode: DiversityMode,
) -> Result<DatasetStats, MetricsError> {
    if records.is_empty() {
        return Err(MetricsError::EmptyDataset);
    }
    let responses: Vec<&str> = records.iter().map(|r| r.response_text()).collect();
    let mean_response_words = responses
        .iter()
        .map(|r| text::word_count(r) as f64)
        .sum::<f64>()
        / responses.len() as f64;

    let lexical_diversity = match mode {
        DiversityMode::Pooled => {
            let pooled = responses.join("\n\n");
            vocd_d(&pooled, vocd_cfg).ok().map(|r| r.d_value)
        }
        DiversityMode::PerResponseMean => {
            let fits: Vec<f64> = responses
                .iter()
                .filter_map(|r| vocd_d(r, vocd_cfg).ok().map(|d| d.d_value))
                .collect();
            if fits.is_empty() {
                None
            } else {
                Some(fits.iter().sum::<f64>() / fits.len() as f64)
            }
        }
    };

    Ok(DatasetStats {
        n_samples: records.len(),
        mean_response_words,
        lexical_diversity,
        diversity_mode: mode,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gateway::mock::{ConstNli, LengthReward};
    use crate::store::{DecodeParams, GeneratorInfo, PassageRef, RecordScores};
    use crate::templates::{Element, TaskKind};

    fn strings(v: &[&str]) -> Vec<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn identical_preds_and_golds_score_one() {
        let texts = strings(&["the cat sat on the mat", "a dog ran through the park"]);
        let report = eval_predictions(
            &texts,
            &texts.clone(),
            &texts.clone(),
            &EvalOptions::default(),
            None,
            None,
            2,
        )
        .unwrap();
        assert_eq!(report.aggregate.rouge_l.f1, 1.0);
        assert_eq!(report.aggregate.k_precision, 1.0);
        assert!(report.aggregate.reward.is_none());
    }

    #[test]
    fn disjoint_vocabulary_gives_zero_k_precision() {
        let preds = strings(&["alpha beta", "gamma delta"]);
        let golds = strings(&["alpha beta", "gamma delta"]);
        let contents = strings(&["uno dos", "tres cuatro"]);
        let report =
            eval_predictions(&preds, &golds, &contents, &EvalOptions::default(), None, None, 2)
                .unwrap();
        assert_eq!(report.aggregate.k_precision, 0.0);
    }

    #[test]
    fn hand_computed_lcs_row() {
        // LCS("the cat sat", "the cat ran") = 2 -> P = R = F = 2/3
        let preds = strings(&["the cat sat"]);
        let golds = strings(&["the cat ran"]);
        let contents = strings(&["the cat sat on things"]);
        let report =
            eval_predictions(&preds, &golds, &contents, &EvalOptions::default(), None, None, 1)
                .unwrap();
        let row = &report.per_example[0];
        assert!((row.rouge_l.f1 - 2.0 / 3.0).abs() < 1e-12);
        assert_eq!(row.k_precision, 1.0);
    }

    #[test]
    fn aggregates_are_exact_means() {
        let preds = strings(&["one two three", "one two", "zz qq"]);
        let golds = strings(&["one two three", "one two three", "one two three"]);
        let contents = strings(&["one two three four", "one two three four", "one two three four"]);
        let report =
            eval_predictions(&preds, &golds, &contents, &EvalOptions::default(), None, None, 2)
                .unwrap();
        let mean_f1 = report.per_example.iter().map(|e| e.rouge_l.f1).sum::<f64>()
            / report.per_example.len() as f64;
        assert!((report.aggregate.rouge_l.f1 - mean_f1).abs() < 1e-12);
        let mean_kp = report.per_example.iter().map(|e| e.k_precision).sum::<f64>()
            / report.per_example.len() as f64;
        assert!((report.aggregate.k_precision - mean_kp).abs() < 1e-12);
    }

    #[test]
    fn external_scorers_fill_their_columns() {
        let preds = strings(&["one two three four five six seven eight nine ten"]);
        let golds = preds.clone();
        let contents = preds.clone();
        let nli = ConstNli(0.8);
        let reward = LengthReward { scale: 20 };
        let report = eval_predictions(
            &preds,
            &golds,
            &contents,
            &EvalOptions { use_reward: true, use_nli: true },
            Some(&nli),
            Some(&reward),
            2,
        )
        .unwrap();
        assert_eq!(report.per_example[0].entailment, Some(0.8));
        assert_eq!(report.per_example[0].reward, Some(0.5));
        assert_eq!(report.aggregate.entailment, Some(0.8));
    }

    #[test]
    fn mismatched_lengths_error() {
        let a = strings(&["x"]);
        let b = strings(&["x", "y"]);
        assert!(matches!(
            eval_predictions(&a, &b, &a, &EvalOptions::default(), None, None, 1),
            Err(MetricsError::LengthMismatch { .. })
        ));
    }

    fn record(response: &str) -> DatasetRecord {
        DatasetRecord {
            record_id: "r".into(),
            passage: PassageRef {
                passage_id: "p".into(),
                doc_id: "d".into(),
                section_path: vec![],
                content: "content".into(),
            },
            task_name: TaskKind::Qa,
            elements: vec![
                Element { marker: "[question]".into(), text: "Q?".into() },
                Element { marker: "[answer]".into(), text: response.into() },
            ],
            scores: RecordScores::default(),
            generator: GeneratorInfo {
                model_id: "m".into(),
                decode_params: DecodeParams { max_new_tokens: 1, temperature: 0.0 },
            },
            pipeline_version: "t".into(),
            created_at: "2024-01-01T00:00:00Z".into(),
        }
    }

    #[test]
    fn stats_mean_response_words() {
        let ten = (0..10).map(|i| format!("w{i}")).collect::<Vec<_>>().join(" ");
        let twenty = (0..20).map(|i| format!("w{i}")).collect::<Vec<_>>().join(" ");
        let records = vec![record(&ten), record(&twenty)];
        let stats =
            dataset_stats(&records, &VocdConfig::default(), DiversityMode::Pooled).unwrap();
        assert_eq!(stats.n_samples, 2);
        assert_eq!(stats.mean_response_words, 15.0);
        // 30 pooled tokens is below the 50-token sampling floor
        assert!(stats.lexical_diversity.is_none());
    }

    #[test]
    fn stats_single_record_counts_one() {
        let records = vec![record("just a few words")];
        let stats =
            dataset_stats(&records, &VocdConfig::default(), DiversityMode::Pooled).unwrap();
        assert_eq!(stats.n_samples, 1);
    }

    #[test]
    fn stats_empty_dataset_errors() {
        assert!(matches!(
            dataset_stats(&[], &VocdConfig::default(), DiversityMode::Pooled),
            Err(MetricsError::EmptyDataset)
        ));
    }
}
