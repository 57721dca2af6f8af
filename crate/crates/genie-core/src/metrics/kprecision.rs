//! K-Precision: the fraction of candidate words that appear in the grounding
//! content. A lexical proxy for faithfulness — in a grounded response most
//! words should come from the content.

use std::collections::HashSet;

use crate::text;

use super::MetricsError;

/// Fraction of candidate tokens whose normalized form occurs in the content's
/// normalized token set (membership, not counts).
///
/// Tokens that normalize to nothing (pure punctuation) are ignored on both
/// sides.
pub fn k_precision(candidate: &str, content: &str) -> Result<f64, MetricsError> {
    let cand: Vec<String> = text::words(candidate)
        .iter()
        .filter_map(|w| text::normalize_token(w))
        .collect();
    if cand.is_empty() {
        return Err(MetricsError::EmptyCandidate);
    }
    let content_set: HashSet<String> = text::words(content)
        .iter()
        .filter_map(|w| text::normalize_token(w))
        .collect();
    let hits = cand.iter().filter(|w| content_set.contains(*w)).count();
    Ok(hits as f64 / cand.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn full_containment_scores_one() {
        assert_eq!(k_precision("beta alpha", "alpha beta gamma").unwrap(), 1.0);
    }

    #[test]
    fn half_containment_scores_half() {
        // alpha, beta present; gamma, delta absent -> 2 of 4
        let v = k_precision("alpha beta gamma delta", "alpha beta epsilon").unwrap();
        assert_eq!(v, 0.5);
    }

    #[test]
    fn normalization_ignores_case_and_punctuation() {
        assert_eq!(k_precision("Alpha, beta!", "alpha beta").unwrap(), 1.0);
    }

    #[test]
    fn empty_candidate_is_an_error() {
        assert!(matches!(
            k_precision("", "content"),
            Err(MetricsError::EmptyCandidate)
        ));
        // pure punctuation normalizes away entirely
        assert!(matches!(
            k_precision("— … !!", "content"),
            Err(MetricsError::EmptyCandidate)
        ));
    }

    #[test]
    fn membership_not_counts() {
        // repeated candidate word still counts per occurrence, content counts once
        assert_eq!(k_precision("alpha alpha alpha", "alpha").unwrap(), 1.0);
    }
}
