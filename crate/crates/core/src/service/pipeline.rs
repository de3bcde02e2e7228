//! Per-final analysis: reconstruct, extract severity features, guess intent.

use std::collections::BTreeSet;
use std::sync::Arc;

use serde::Serialize;

use super::config::{BackendKind, ConfigError, ServiceConfig};
use crate::knowledge::{
    predict_intent, reconstruct, ChatCompletionGenerator, GeneratorBackend, IntentConfig, IntentPrediction, KnowledgeBase,
    ReconstructionParams, ReconstructionResult, SharedKnowledge, TopContextGenerator,
};
use crate::triage::{extract_features, EmotionBackend, KeywordRules, LexiconEmotion, Rationale, SeverityFeatures};

/// Prefix that keeps intent labels apart from keywords in incident signatures.
pub const INTENT_TERM_PREFIX: &str = "intent:";

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Analysis {
    pub reconstruction: ReconstructionResult,
    pub features: SeverityFeatures,
    pub rationale: Rationale,
    pub intent: IntentPrediction,
}

impl Analysis {
    /// Matched keywords plus the intent label.
    pub fn signature_terms(&self) -> BTreeSet<String> {
        let mut terms: BTreeSet<String> = self.rationale.matched_keywords.iter().cloned().collect();
        terms.insert(format!("{INTENT_TERM_PREFIX}{}", self.intent.chosen));
        terms
    }
}

pub struct Pipeline {
    pub knowledge: SharedKnowledge,
    pub generator: Arc<dyn GeneratorBackend>,
    pub emotion: Arc<dyn EmotionBackend>,
    pub intent: IntentConfig,
    pub params: ReconstructionParams,
}

impl std::fmt::Debug for Pipeline {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Pipeline").field("intent", &self.intent).field("params", &self.params).finish_non_exhaustive()
    }
}

impl Pipeline {
    /// Mock generator and lexicon emotion over `kb`.
    pub fn mock(kb: KnowledgeBase) -> Self {
        Self {
            knowledge: SharedKnowledge::new(kb),
            generator: Arc::new(TopContextGenerator),
            emotion: Arc::new(LexiconEmotion::default()),
            intent: IntentConfig::default(),
            params: ReconstructionParams::default(),
        }
    }

    pub fn from_config(cfg: &ServiceConfig) -> Result<Self, ConfigError> {
        let kb = KnowledgeBase::from_corpus_file(&cfg.paths.corpus).map_err(|e| ConfigError::Invalid(e.to_string()))?;
        let generator: Arc<dyn GeneratorBackend> = match cfg.backends.generator {
            BackendKind::Mock => Arc::new(TopContextGenerator),
            BackendKind::Live => Arc::new(
                ChatCompletionGenerator::from_env(cfg.generator.clone()).map_err(|e| ConfigError::Invalid(e.to_string()))?,
            ),
        };
        Ok(Self {
            knowledge: SharedKnowledge::new(kb),
            generator,
            emotion: Arc::new(cfg.emotion.clone()),
            intent: cfg.intent.clone(),
            params: cfg.reconstruction.clone(),
        })
    }

    /// Reconstruction, falling back to the raw transcript when generation fails.
    pub fn reconstruct(&self, transcript: &str) -> ReconstructionResult {
        let kb = match self.knowledge.get() {
            Ok(kb) => kb,
            Err(e) => {
                tracing::warn!(error = %e, "no knowledge base, using raw transcript");
                return ReconstructionResult::fallback(transcript, Vec::new());
            }
        };
        match reconstruct(&kb, transcript, self.generator.clone(), &self.params) {
            Ok(r) => r,
            Err(e) => {
                tracing::warn!(error = %e, "reconstruction failed, using raw transcript");
                let retrieved = if transcript.trim().is_empty() {
                    Vec::new()
                } else {
                    kb.retrieve(transcript, self.params.k).unwrap_or_default()
                };
                ReconstructionResult::fallback(transcript, retrieved)
            }
        }
    }

    pub fn analyze(&self, transcript: &str, rules: &KeywordRules) -> Analysis {
        let reconstruction = self.reconstruct(transcript);
        let (features, rationale) = extract_features(transcript, &reconstruction, rules, self.emotion.as_ref());
        let intent = predict_intent(transcript, &reconstruction.retrieved_context, &self.intent);
        Analysis { reconstruction, features, rationale, intent }
    }
}
