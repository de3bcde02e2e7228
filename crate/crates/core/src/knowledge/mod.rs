//! Retrieval-augmented transcript reconstruction.
//!
//! A [`KnowledgeBase`] holds the conversation corpus, its fitted TF-IDF model
//! and a flat L2 index. [`reconstruct`] retrieves the nearest records for a
//! transcript, builds a prompt and asks a [`GeneratorBackend`] for the most
//! likely intended utterance.

pub mod corpus;
pub mod generator;
pub mod index;
pub mod intent;
pub mod prompt;
pub mod tfidf;

use std::path::Path;
use std::sync::{mpsc, Arc, RwLock};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use corpus::{
    preprocess_dataset, read_corpus_csv, read_corpus_file, read_raw_csv, read_raw_csv_file, write_corpus_csv,
    write_corpus_file, ConversationRecord, CorpusError, RawConversation, Speaker, Turn,
};
pub use generator::{
    ChatCompletionConfig, ChatCompletionGenerator, FixtureGenerator, GeneratorBackend, GeneratorError,
    TopContextGenerator, UnavailableGenerator,
};
pub use index::{build_index, squared_l2, FlatIndex, Matrix, Neighbor};
pub use intent::{predict_intent, IntentConfig, IntentPrediction};
pub use prompt::assemble_prompt;
pub use tfidf::{fit_tfidf, TfidfModel};

#[derive(Debug, Error)]
pub enum KnowledgeError {
    #[error("corpus is empty")]
    EmptyCorpus,
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("knowledge base has not been built")]
    NotFitted,
    #[error("transcript is empty")]
    EmptyTranscript,
    #[error("generator unavailable: {0}")]
    GeneratorUnavailable(GeneratorError),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error("index file: {0}")]
    Persist(String),
}

/// Generation knobs for [`reconstruct`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReconstructionParams {
    pub k: usize,
    pub max_tokens: u32,
    pub temperature: f64,
    pub timeout_ms: u64,
}

impl Default for ReconstructionParams {
    fn default() -> Self {
        Self { k: 5, max_tokens: 150, temperature: 0.7, timeout_ms: 5_000 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReconstructionResult {
    pub predicted_text: String,
    pub retrieved_context: Vec<String>,
    /// True when the generator failed and `predicted_text` is the raw transcript.
    #[serde(default)]
    pub fallback: bool,
}

impl ReconstructionResult {
    pub fn fallback(transcript: &str, retrieved_context: Vec<String>) -> Self {
        Self { predicted_text: transcript.to_string(), retrieved_context, fallback: true }
    }
}

/// Corpus, model and index, immutable once built.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnowledgeBase {
    records: Vec<ConversationRecord>,
    model: TfidfModel,
    index: FlatIndex,
}

impl KnowledgeBase {
    pub fn build(records: Vec<ConversationRecord>) -> Result<Self, KnowledgeError> {
        let texts: Vec<&str> = records.iter().map(|r| r.combined.as_str()).collect();
        let (model, embeddings) = fit_tfidf(&texts)?;
        let index = build_index(embeddings)?;
        Ok(Self { records, model, index })
    }

    /// Build from plain documents, each used as its own combined text.
    pub fn from_texts<S: AsRef<str>>(texts: &[S]) -> Result<Self, KnowledgeError> {
        let records = texts
            .iter()
            .map(|t| ConversationRecord {
                respondent_msg: String::new(),
                victim_msg_1: String::new(),
                victim_msg_2: String::new(),
                combined: t.as_ref().to_string(),
            })
            .collect();
        Self::build(records)
    }

    pub fn from_corpus_file(path: &Path) -> Result<Self, KnowledgeError> {
        Self::build(read_corpus_file(path)?)
    }

    pub fn records(&self) -> &[ConversationRecord] {
        &self.records
    }

    pub fn model(&self) -> &TfidfModel {
        &self.model
    }

    pub fn index(&self) -> &FlatIndex {
        &self.index
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Nearest rows for `query`. A query with no known tokens embeds to the
    /// zero vector; it gets the first `k` records in corpus order.
    pub fn neighbors(&self, query: &str, k: usize) -> Result<Vec<Neighbor>, KnowledgeError> {
        let q = self.model.transform(query);
        if q.iter().all(|&x| x == 0.0) {
            return Ok((0..k.min(self.len()))
                .map(|row| Neighbor { row, distance: squared_l2(&q, self.index.embeddings().row(row)) })
                .collect());
        }
        self.index.search(&q, k)
    }

    /// Combined texts of the `k` nearest records, closest first.
    pub fn retrieve(&self, query: &str, k: usize) -> Result<Vec<String>, KnowledgeError> {
        Ok(self.neighbors(query, k)?.into_iter().map(|n| self.records[n.row].combined.clone()).collect())
    }

    pub fn save_json(&self, path: &Path) -> Result<(), KnowledgeError> {
        let json = serde_json::to_vec(self).map_err(|e| KnowledgeError::Persist(e.to_string()))?;
        std::fs::write(path, json).map_err(|e| KnowledgeError::Persist(format!("{}: {e}", path.display())))
    }

    pub fn load_json(path: &Path) -> Result<Self, KnowledgeError> {
        let bytes = std::fs::read(path).map_err(|e| KnowledgeError::Persist(format!("{}: {e}", path.display())))?;
        serde_json::from_slice(&bytes).map_err(|e| KnowledgeError::Persist(e.to_string()))
    }
}

/// Atomically swappable handle: readers keep whichever base they cloned.
#[derive(Debug, Clone, Default)]
pub struct SharedKnowledge {
    inner: Arc<RwLock<Option<Arc<KnowledgeBase>>>>,
}

impl SharedKnowledge {
    pub fn new(kb: KnowledgeBase) -> Self {
        Self { inner: Arc::new(RwLock::new(Some(Arc::new(kb)))) }
    }

    pub fn get(&self) -> Result<Arc<KnowledgeBase>, KnowledgeError> {
        self.inner.read().expect("knowledge lock poisoned").clone().ok_or(KnowledgeError::NotFitted)
    }

    pub fn replace(&self, kb: KnowledgeBase) {
        *self.inner.write().expect("knowledge lock poisoned") = Some(Arc::new(kb));
    }

    pub fn retrieve(&self, query: &str, k: usize) -> Result<Vec<String>, KnowledgeError> {
        self.get()?.retrieve(query, k)
    }
}

/// Call `backend` on a worker thread and give up after `timeout`.
fn complete_with_timeout(
    backend: Arc<dyn GeneratorBackend>,
    prompt: String,
    params: &ReconstructionParams,
) -> Result<String, GeneratorError> {
    let timeout = Duration::from_millis(params.timeout_ms);
    let (tx, rx) = mpsc::sync_channel(1);
    let (max_tokens, temperature) = (params.max_tokens, params.temperature);
    std::thread::spawn(move || {
        let _ = tx.send(backend.complete(&prompt, max_tokens, temperature));
    });
    match rx.recv_timeout(timeout) {
        Ok(result) => result,
        Err(mpsc::RecvTimeoutError::Timeout) => Err(GeneratorError::Timeout(timeout)),
        Err(mpsc::RecvTimeoutError::Disconnected) => Err(GeneratorError::Connection("generator thread panicked".into())),
    }
}

/// Retrieve, prompt and generate.
pub fn reconstruct(
    kb: &KnowledgeBase,
    transcript: &str,
    backend: Arc<dyn GeneratorBackend>,
    params: &ReconstructionParams,
) -> Result<ReconstructionResult, KnowledgeError> {
    let transcript = transcript.trim();
    if transcript.is_empty() {
        return Err(KnowledgeError::EmptyTranscript);
    }
    let retrieved = kb.retrieve(transcript, params.k)?;
    let prompt = assemble_prompt(transcript, &retrieved);
    let predicted_text = complete_with_timeout(backend, prompt, params).map_err(KnowledgeError::GeneratorUnavailable)?;
    Ok(ReconstructionResult { predicted_text, retrieved_context: retrieved, fallback: false })
}
