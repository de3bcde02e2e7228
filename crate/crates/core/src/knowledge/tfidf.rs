//! TF-IDF embedding with smoothed idf and L2-normalized rows.
//!
//! `idf(t) = ln((1 + N) / (1 + df(t))) + 1`, term weight `tf * idf` with raw
//! counts for `tf`. Vocabulary columns are assigned in lexicographic token
//! order.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::index::Matrix;
use super::KnowledgeError;
use crate::text::tokenize;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TfidfModel {
    pub vocabulary: BTreeMap<String, usize>,
    pub idf: Vec<f64>,
    pub doc_count: usize,
}

fn l2_normalize(row: &mut [f64]) {
    let norm = row.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm > 0.0 {
        row.iter_mut().for_each(|x| *x /= norm);
    }
}

impl TfidfModel {
    pub fn dim(&self) -> usize {
        self.idf.len()
    }

    /// Embed `text` with the fitted vocabulary; unknown tokens are ignored.
    pub fn transform(&self, text: &str) -> Vec<f64> {
        let mut row = vec![0.0; self.dim()];
        for token in tokenize(text) {
            if let Some(&col) = self.vocabulary.get(&token) {
                row[col] += 1.0;
            }
        }
        for (w, idf) in row.iter_mut().zip(&self.idf) {
            *w *= idf;
        }
        l2_normalize(&mut row);
        row
    }
}

/// Fit the model on `corpus` and return it with the document embeddings.
pub fn fit_tfidf<S: AsRef<str>>(corpus: &[S]) -> Result<(TfidfModel, Matrix), KnowledgeError> {
    if corpus.is_empty() {
        return Err(KnowledgeError::EmptyCorpus);
    }
    let docs: Vec<Vec<String>> = corpus.iter().map(|d| tokenize(d.as_ref())).collect();

    let mut df: BTreeMap<String, usize> = BTreeMap::new();
    for tokens in &docs {
        let mut seen: Vec<&String> = tokens.iter().collect();
        seen.sort();
        seen.dedup();
        for t in seen {
            *df.entry(t.clone()).or_default() += 1;
        }
    }
    let n = docs.len() as f64;
    let vocabulary: BTreeMap<String, usize> = df.keys().enumerate().map(|(i, t)| (t.clone(), i)).collect();
    let idf: Vec<f64> = df.values().map(|&d| ((1.0 + n) / (1.0 + d as f64)).ln() + 1.0).collect();
    let model = TfidfModel { vocabulary, idf, doc_count: docs.len() };

    let mut data = Vec::with_capacity(docs.len() * model.dim());
    for doc in corpus {
        data.extend(model.transform(doc.as_ref()));
    }
    let matrix = Matrix::from_rows_flat(model.dim(), data);
    Ok((model, matrix))
}
