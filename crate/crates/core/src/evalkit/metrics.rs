//! BLEU, ROUGE-N, ROUGE-L and concept coverage over shared tokens.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use super::EvalError;
use crate::text::{contains_phrase, tokenize};

/// Numerator floor for n-gram precisions with no matches.
pub const BLEU_EPSILON: f64 = 1e-9;
pub const DEFAULT_MAX_N: usize = 4;

fn ngram_counts(tokens: &[String], n: usize) -> HashMap<&[String], usize> {
    let mut counts = HashMap::new();
    if n > 0 && tokens.len() >= n {
        for w in tokens.windows(n) {
            *counts.entry(w).or_insert(0) += 1;
        }
    }
    counts
}

/// Sentence BLEU with uniform weights, clipped n-gram counts, an epsilon
/// floor on zero matches and a brevity penalty against the closest
/// reference length. An empty candidate scores 0.
pub fn bleu<S: AsRef<str>>(candidate: &str, references: &[S], max_n: usize) -> Result<f64, EvalError> {
    if references.is_empty() {
        return Err(EvalError::NoReferences);
    }
    let cand = tokenize(candidate);
    if cand.is_empty() || max_n == 0 {
        return Ok(0.0);
    }
    let refs: Vec<Vec<String>> = references.iter().map(|r| tokenize(r.as_ref())).collect();

    let mut log_sum = 0.0;
    for n in 1..=max_n {
        let cand_counts = ngram_counts(&cand, n);
        let ref_counts: Vec<_> = refs.iter().map(|r| ngram_counts(r, n)).collect();
        let total: usize = cand_counts.values().sum();
        let matches: usize = cand_counts
            .iter()
            .map(|(g, &c)| c.min(ref_counts.iter().map(|rc| rc.get(g).copied().unwrap_or(0)).max().unwrap_or(0)))
            .sum();
        let p = (matches as f64).max(BLEU_EPSILON) / (total.max(1) as f64);
        log_sum += p.ln();
    }
    let geo = (log_sum / max_n as f64).exp();

    let c = cand.len();
    let r = refs
        .iter()
        .map(Vec::len)
        .min_by_key(|&len| (len.abs_diff(c), len))
        .expect("references nonempty");
    let bp = if c < r { (1.0 - r as f64 / c as f64).exp() } else { 1.0 };
    Ok((bp * geo).clamp(0.0, 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PrfScore {
    pub precision: f64,
    pub recall: f64,
    pub f: f64,
}

impl PrfScore {
    fn from_overlap(overlap: usize, cand_total: usize, ref_total: usize) -> Self {
        let ratio = |num: usize, den: usize| if den == 0 { 0.0 } else { num as f64 / den as f64 };
        let precision = ratio(overlap, cand_total);
        let recall = ratio(overlap, ref_total);
        let f = if precision + recall == 0.0 { 0.0 } else { 2.0 * precision * recall / (precision + recall) };
        Self { precision, recall, f }
    }
}

/// Clipped n-gram overlap precision/recall/F.
///
/// Panics if `n == 0`.
pub fn rouge_n(candidate: &str, reference: &str, n: usize) -> PrfScore {
    assert!(n >= 1, "rouge_n needs n >= 1");
    let cand = tokenize(candidate);
    let refr = tokenize(reference);
    let cc = ngram_counts(&cand, n);
    let rc = ngram_counts(&refr, n);
    let overlap = cc.iter().map(|(g, &c)| c.min(rc.get(g).copied().unwrap_or(0))).sum();
    PrfScore::from_overlap(overlap, cc.values().sum(), rc.values().sum())
}

pub fn lcs_len(a: &[String], b: &[String]) -> usize {
    let mut prev = vec![0usize; b.len() + 1];
    let mut cur = vec![0usize; b.len() + 1];
    for x in a {
        for (j, y) in b.iter().enumerate() {
            cur[j + 1] = if x == y { prev[j] + 1 } else { prev[j + 1].max(cur[j]) };
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

/// Longest-common-subsequence precision/recall/F.
pub fn rouge_l(candidate: &str, reference: &str) -> PrfScore {
    let cand = tokenize(candidate);
    let refr = tokenize(reference);
    PrfScore::from_overlap(lcs_len(&cand, &refr), cand.len(), refr.len())
}

/// Concept name to alternative surface forms. The name is itself a form.
pub type ConceptSet = BTreeMap<String, Vec<String>>;

/// Fraction of concepts with at least one surface form present as whole
/// tokens. `None` for an empty concept set.
pub fn conceptual_precision(prediction: &str, concepts: &ConceptSet) -> Option<f64> {
    if concepts.is_empty() {
        return None;
    }
    let tokens = tokenize(prediction);
    let hit = concepts
        .iter()
        .filter(|(name, forms)| {
            std::iter::once(*name).chain(forms.iter()).any(|f| contains_phrase(&tokens, &tokenize(f)))
        })
        .count();
    Some(hit as f64 / concepts.len() as f64)
}
