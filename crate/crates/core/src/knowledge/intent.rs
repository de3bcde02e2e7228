//! Lexicon-based intent scoring.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::text::{count_phrase, tokenize};

/// Ordered label set with one term list per label. Label order decides ties.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IntentConfig {
    pub labels: Vec<String>,
    pub lexicons: BTreeMap<String, Vec<String>>,
}

impl Default for IntentConfig {
    fn default() -> Self {
        let lex = |terms: &[&str]| terms.iter().map(|s| s.to_string()).collect::<Vec<_>>();
        let lexicons = BTreeMap::from([
            ("fire".to_string(), lex(&["fire", "smoke", "flames", "burning", "blaze", "explosion"])),
            (
                "medical".to_string(),
                lex(&["ambulance", "bleeding", "hurt", "pain", "breathing", "unconscious", "injured", "sick", "acid"]),
            ),
            (
                "crime".to_string(),
                lex(&["gun", "shot", "shooting", "stabbing", "knife", "kidnapped", "breaking", "robbery", "killing", "police"]),
            ),
            ("nuisance".to_string(), lex(&["noise", "barking", "loud", "music", "disturbing", "complained", "party"])),
        ]);
        Self { labels: ["fire", "medical", "crime", "nuisance"].map(String::from).to_vec(), lexicons }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntentPrediction {
    /// `(label, probability)` in configured label order.
    pub scores: Vec<(String, f64)>,
    pub chosen: String,
}

impl IntentPrediction {
    pub fn score(&self, label: &str) -> Option<f64> {
        self.scores.iter().find(|(l, _)| l == label).map(|(_, s)| *s)
    }
}

/// Raw lexicon hit counts per label over `texts`.
pub fn lexicon_hits(texts: &[&str], cfg: &IntentConfig) -> Vec<f64> {
    let docs: Vec<Vec<String>> = texts.iter().map(|t| tokenize(t)).collect();
    cfg.labels
        .iter()
        .map(|label| {
            let terms = cfg.lexicons.get(label).map(Vec::as_slice).unwrap_or(&[]);
            terms
                .iter()
                .map(|term| {
                    let needle = tokenize(term);
                    docs.iter().map(|d| count_phrase(d, &needle)).sum::<usize>()
                })
                .sum::<usize>() as f64
        })
        .collect()
}

/// Max-subtracted softmax.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exp: Vec<f64> = logits.iter().map(|l| (l - max).exp()).collect();
    let sum: f64 = exp.iter().sum();
    exp.into_iter().map(|e| e / sum).collect()
}

/// First index holding the maximum value.
pub fn argmax_first(values: &[f64]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, v) in values.iter().enumerate() {
        if best.is_none_or(|b| *v > values[b]) {
            best = Some(i);
        }
    }
    best
}

/// Score every label on the transcript plus retrieved context.
///
/// Panics if the label set is empty.
pub fn predict_intent(transcript: &str, retrieved: &[String], cfg: &IntentConfig) -> IntentPrediction {
    assert!(!cfg.labels.is_empty(), "intent label set must be nonempty");
    let mut texts = vec![transcript];
    texts.extend(retrieved.iter().map(String::as_str));
    let raw = lexicon_hits(&texts, cfg);
    let probs = softmax(&raw);
    let chosen = cfg.labels[argmax_first(&raw).expect("nonempty")].clone();
    IntentPrediction { scores: cfg.labels.iter().cloned().zip(probs).collect(), chosen }
}
