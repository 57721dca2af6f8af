//! Summary-level ROUGE-L: longest common subsequence over pipeline tokens,
//! no stemming, no stopword removal.

use serde::{Deserialize, Serialize};

use crate::text;

/// Precision/recall/F1 triple from an LCS match.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RougeScore {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl RougeScore {
    const ZERO: RougeScore = RougeScore {
        precision: 0.0,
        recall: 0.0,
        f1: 0.0,
    };
}

/// ROUGE-L between a candidate and a reference text.
///
/// Empty inputs are allowed and score zero on the empty side's axis.
pub fn rouge_l(candidate: &str, reference: &str) -> RougeScore {
    let cand = text::words(candidate);
    let refr = text::words(reference);
    rouge_l_tokens(&cand, &refr)
}

/// ROUGE-L over already-tokenized sequences.
pub fn rouge_l_tokens<T: AsRef<str>>(candidate: &[T], reference: &[T]) -> RougeScore {
    if candidate.is_empty() || reference.is_empty() {
        return RougeScore::ZERO;
    }
    let lcs = lcs_len(candidate, reference) as f64;
    let precision = lcs / candidate.len() as f64;
    let recall = lcs / reference.len() as f64;
    let f1 = if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    };
    RougeScore {
        precision,
        recall,
        f1,
    }
}

/// Length of the longest common subsequence, two-row DP.
fn lcs_len<T: AsRef<str>>(a: &[T], b: &[T]) -> usize {
    let n = b.len();
    let mut prev = vec![0usize; n + 1];
    let mut cur = vec![0usize; n + 1];
    for ai in a {
        for (j, bj) in b.iter().enumerate() {
            cur[j + 1] = if ai.as_ref() == bj.as_ref() {
                prev[j] + 1
            } else {
                cur[j].max(prev[j + 1])
            };
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[n]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_strings_score_one() {
        let s = rouge_l("the cat sat on the mat", "the cat sat on the mat");
        assert_eq!(s.precision, 1.0);
        assert_eq!(s.recall, 1.0);
        assert_eq!(s.f1, 1.0);
    }

    #[test]
    fn shared_prefix_scores_two_thirds() {
        // LCS("the cat sat", "the cat ran") = ["the", "cat"], len 2
        let s = rouge_l("the cat sat", "the cat ran");
        assert!((s.precision - 2.0 / 3.0).abs() < 1e-12);
        assert!((s.recall - 2.0 / 3.0).abs() < 1e-12);
        assert!((s.f1 - 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn empty_candidate_scores_zero() {
        let s = rouge_l("", "anything");
        assert_eq!(s.precision, 0.0);
        assert_eq!(s.recall, 0.0);
        assert_eq!(s.f1, 0.0);
    }

    #[test]
    fn disjoint_tokens_score_zero() {
        let s = rouge_l("alpha beta", "gamma delta");
        assert_eq!(s.f1, 0.0);
    }

    #[test]
    fn swapping_arguments_swaps_p_and_r() {
        let a = "one two three four";
        let b = "one two";
        let fwd = rouge_l(a, b);
        let rev = rouge_l(b, a);
        assert_eq!(fwd.precision, rev.recall);
        assert_eq!(fwd.recall, rev.precision);
        assert_eq!(fwd.f1, rev.f1);
    }
}
