//! Severity assessment.
//!
//! Three rule outputs on the `{1, 2, 4}` scale feed a weighted score
//! `S = w_K·K + w_E·E + w_C·C`, which thresholds map to a [`Severity`]:
//! Severe if `S >= theta_high`, Moderate if `theta_mid <= S < theta_high`,
//! Mild otherwise.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::knowledge::ReconstructionResult;
use crate::text::{contains_phrase, count_phrase, tokenize};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TriageError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("need at least two severity levels, got {0}")]
    TooFewLevels(usize),
    #[error("case {case_index}: true class has probability zero")]
    DegenerateDistribution { case_index: usize },
    #[error("case {case_index}: class {class} outside a {levels}-level distribution")]
    ClassOutOfRange { case_index: usize, class: usize, levels: usize },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("emotion classifier unavailable: {0}")]
    ClassifierUnavailable(String),
}

/// Severity on the numeric scale Mild=1, Moderate=2, Severe=4.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Severity {
    #[serde(alias = "low")]
    Mild,
    Moderate,
    #[serde(alias = "high")]
    Severe,
}

impl Severity {
    pub const ALL: [Severity; 3] = [Severity::Mild, Severity::Moderate, Severity::Severe];

    pub fn value(self) -> f64 {
        match self {
            Severity::Mild => 1.0,
            Severity::Moderate => 2.0,
            Severity::Severe => 4.0,
        }
    }

    /// Position in [`Severity::ALL`].
    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_value(v: u8) -> Option<Self> {
        match v {
            1 => Some(Severity::Mild),
            2 => Some(Severity::Moderate),
            4 => Some(Severity::Severe),
            _ => None,
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "mild" | "low" | "1" => Some(Severity::Mild),
            "moderate" | "2" => Some(Severity::Moderate),
            "severe" | "high" | "4" => Some(Severity::Severe),
            _ => None,
        }
    }
}

impl fmt::Display for Severity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Severity::Mild => "mild",
            Severity::Moderate => "moderate",
            Severity::Severe => "severe",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KeywordRules {
    pub severe: BTreeSet<String>,
    pub mild: BTreeSet<String>,
}

impl Default for KeywordRules {
    fn default() -> Self {
        let set = |terms: &[&str]| terms.iter().map(|s| s.to_string()).collect();
        Self {
            severe: set(&["gun", "stabbing", "shooting", "fire", "accident", "emergency", "death", "killed"]),
            mild: set(&["noise", "neighbor", "pet", "minor"]),
        }
    }
}

impl KeywordRules {
    pub fn validate(&self) -> Result<(), TriageError> {
        for term in self.severe.iter().chain(&self.mild) {
            if term.trim().is_empty() || *term != term.to_lowercase() {
                return Err(TriageError::InvalidConfig(format!("keyword `{term}` must be nonempty lowercase")));
            }
        }
        if let Some(t) = self.severe.intersection(&self.mild).next() {
            return Err(TriageError::InvalidConfig(format!("keyword `{t}` is both severe and mild")));
        }
        Ok(())
    }
}

/// The level and the terms that decided it. Severe terms win over mild ones;
/// only the terms of the winning tier are reported.
pub fn keyword_matches(text: &str, rules: &KeywordRules) -> (Severity, Vec<String>) {
    let tokens = tokenize(text);
    let hits = |set: &BTreeSet<String>| -> Vec<String> {
        set.iter().filter(|t| contains_phrase(&tokens, &tokenize(t))).cloned().collect()
    };
    let severe = hits(&rules.severe);
    if !severe.is_empty() {
        return (Severity::Severe, severe);
    }
    let mild = hits(&rules.mild);
    if !mild.is_empty() {
        return (Severity::Mild, mild);
    }
    (Severity::Moderate, Vec::new())
}

pub fn keyword_level(text: &str, rules: &KeywordRules) -> Severity {
    keyword_matches(text, rules).0
}

/// Keyword rules over the retrieved records joined together; nothing retrieved
/// means Moderate.
pub fn context_level(retrieved: &[String], rules: &KeywordRules) -> Severity {
    if retrieved.is_empty() {
        return Severity::Moderate;
    }
    keyword_level(&retrieved.join(" "), rules)
}

pub trait EmotionBackend: Send + Sync {
    fn classify(&self, text: &str) -> Result<String, TriageError>;
}

pub const NEUTRAL: &str = "neutral";

/// Word lists per emotion label; the label with the most hits wins and any
/// tie for first place (including no hits) is `neutral`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct LexiconEmotion {
    pub lexicons: BTreeMap<String, Vec<String>>,
}

impl Default for LexiconEmotion {
    fn default() -> Self {
        let lex = |terms: &[&str]| terms.iter().map(|s| s.to_string()).collect::<Vec<_>>();
        Self {
            lexicons: BTreeMap::from([
                ("sadness".into(), lex(&["sad", "crying", "cry", "died", "dead", "dying", "grief", "lost", "passed away"])),
                ("anger".into(), lex(&["angry", "mad", "furious", "hate", "yelling", "screaming", "sick of"])),
                ("joy".into(), lex(&["happy", "glad", "great", "wonderful", "excited", "laughing"])),
                ("fear".into(), lex(&["scared", "afraid", "terrified", "panic", "frightened"])),
                ("surprise".into(), lex(&["suddenly", "shocked", "unexpected"])),
            ]),
        }
    }
}

impl EmotionBackend for LexiconEmotion {
    fn classify(&self, text: &str) -> Result<String, TriageError> {
        let tokens = tokenize(text);
        let mut best: Option<(&str, usize)> = None;
        let mut tied = false;
        for (label, terms) in &self.lexicons {
            let hits: usize = terms.iter().map(|t| count_phrase(&tokens, &tokenize(t))).sum();
            match best {
                Some((_, n)) if hits == n => tied = true,
                Some((_, n)) if hits < n => {}
                _ => {
                    best = Some((label, hits));
                    tied = false;
                }
            }
        }
        Ok(match best {
            Some((label, n)) if n > 0 && !tied => label.to_string(),
            _ => NEUTRAL.to_string(),
        })
    }
}

/// Always errors, for exercising the fallback.
#[derive(Debug, Clone, Copy, Default)]
pub struct UnavailableEmotion;

impl EmotionBackend for UnavailableEmotion {
    fn classify(&self, _: &str) -> Result<String, TriageError> {
        Err(TriageError::ClassifierUnavailable("emotion backend disabled".into()))
    }
}

/// sadness or anger is Severe, joy is Mild, everything else Moderate.
pub fn emotion_level_for_label(label: &str) -> Severity {
    match label {
        "sadness" | "anger" => Severity::Severe,
        "joy" => Severity::Mild,
        _ => Severity::Moderate,
    }
}

/// Level and label; a failing classifier yields Moderate and label `neutral`.
pub fn emotion_level(text: &str, backend: &dyn EmotionBackend) -> (Severity, String) {
    match backend.classify(text) {
        Ok(label) => (emotion_level_for_label(&label), label),
        Err(e) => {
            tracing::warn!(error = %e, "emotion classifier failed, using moderate");
            (Severity::Moderate, NEUTRAL.to_string())
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SeverityWeights {
    pub w_k: f64,
    pub w_e: f64,
    pub w_c: f64,
    pub theta_high: f64,
    pub theta_mid: f64,
}

impl Default for SeverityWeights {
    fn default() -> Self {
        Self { w_k: 0.5, w_e: 0.3, w_c: 0.2, theta_high: 3.0, theta_mid: 1.5 }
    }
}

pub(crate) fn check_simplex(name: &str, ws: &[f64]) -> Result<(), String> {
    if ws.iter().any(|w| !w.is_finite() || *w < 0.0) {
        return Err(format!("{name} weights must be nonnegative"));
    }
    let sum: f64 = ws.iter().sum();
    if (sum - 1.0).abs() > 1e-6 {
        return Err(format!("{name} weights must sum to 1, got {sum}"));
    }
    Ok(())
}

impl SeverityWeights {
    pub fn validate(&self) -> Result<(), TriageError> {
        check_simplex("severity", &[self.w_k, self.w_e, self.w_c]).map_err(TriageError::InvalidConfig)?;
        if self.theta_mid.partial_cmp(&self.theta_high) != Some(std::cmp::Ordering::Less) {
            return Err(TriageError::InvalidConfig("theta_mid must be below theta_high".into()));
        }
        Ok(())
    }

    pub fn level_for(&self, score: f64) -> Severity {
        if score >= self.theta_high {
            Severity::Severe
        } else if score >= self.theta_mid {
            Severity::Moderate
        } else {
            Severity::Mild
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeverityFeatures {
    pub keyword: Severity,
    pub emotion: Severity,
    pub context: Severity,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Rationale {
    pub matched_keywords: Vec<String>,
    pub emotion_label: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeverityAssessment {
    pub score: f64,
    pub level: Severity,
    pub features: SeverityFeatures,
    pub rationale: Rationale,
}

pub fn severity_score(features: SeverityFeatures, weights: &SeverityWeights) -> SeverityAssessment {
    let score = weights.w_k * features.keyword.value()
        + weights.w_e * features.emotion.value()
        + weights.w_c * features.context.value();
    SeverityAssessment { score, level: weights.level_for(score), features, rationale: Rationale::default() }
}

/// `P(s | x) = exp(theta_s·x) / Σ_j exp(theta_j·x)`.
pub fn severity_softmax(x: &[f64], theta: &[Vec<f64>]) -> Result<Vec<f64>, TriageError> {
    if theta.len() < 2 {
        return Err(TriageError::TooFewLevels(theta.len()));
    }
    let mut logits = Vec::with_capacity(theta.len());
    for t in theta {
        if t.len() != x.len() {
            return Err(TriageError::DimensionMismatch { expected: x.len(), got: t.len() });
        }
        logits.push(t.iter().zip(x).map(|(a, b)| a * b).sum::<f64>());
    }
    Ok(crate::knowledge::intent::softmax(&logits))
}

/// `Σ δ_i · (−ln P_i[c_i])` over `(c_i, P_i)` cases.
pub fn misclassification_penalty(cases: &[(usize, Vec<f64>)], delta: &[f64]) -> Result<f64, TriageError> {
    if cases.len() != delta.len() {
        return Err(TriageError::DimensionMismatch { expected: cases.len(), got: delta.len() });
    }
    let mut total = 0.0;
    for (case_index, ((class, dist), d)) in cases.iter().zip(delta).enumerate() {
        let p = *dist
            .get(*class)
            .ok_or(TriageError::ClassOutOfRange { case_index, class: *class, levels: dist.len() })?;
        if p <= 0.0 {
            return Err(TriageError::DegenerateDistribution { case_index });
        }
        total += d * -p.ln();
    }
    Ok(total)
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TriageConfig {
    pub keywords: KeywordRules,
    pub weights: SeverityWeights,
}

impl TriageConfig {
    pub fn validate(&self) -> Result<(), TriageError> {
        self.keywords.validate()?;
        self.weights.validate()
    }
}

/// Rule features for a transcript and its reconstruction.
pub fn extract_features(
    transcript: &str,
    reconstruction: &ReconstructionResult,
    rules: &KeywordRules,
    emotion: &dyn EmotionBackend,
) -> (SeverityFeatures, Rationale) {
    let scanned = format!("{} {}", transcript, reconstruction.predicted_text);
    let (keyword, matched_keywords) = keyword_matches(&scanned, rules);
    let (emotion, emotion_label) = emotion_level(&reconstruction.predicted_text, emotion);
    let context = context_level(&reconstruction.retrieved_context, rules);
    (SeverityFeatures { keyword, emotion, context }, Rationale { matched_keywords, emotion_label })
}

pub fn assess_features(
    features: SeverityFeatures,
    rationale: Rationale,
    weights: &SeverityWeights,
) -> SeverityAssessment {
    SeverityAssessment { rationale, ..severity_score(features, weights) }
}

pub fn assess(
    transcript: &str,
    reconstruction: &ReconstructionResult,
    cfg: &TriageConfig,
    emotion: &dyn EmotionBackend,
) -> SeverityAssessment {
    let (features, rationale) = extract_features(transcript, reconstruction, &cfg.keywords, emotion);
    assess_features(features, rationale, &cfg.weights)
}
