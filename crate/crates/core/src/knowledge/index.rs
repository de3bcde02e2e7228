//! Exhaustive nearest-neighbour search by squared Euclidean distance.

use serde::{Deserialize, Serialize};

use super::KnowledgeError;

/// Dense row-major matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    dim: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn from_rows_flat(dim: usize, data: Vec<f64>) -> Self {
        assert!(dim == 0 || data.len().is_multiple_of(dim), "data length must be a multiple of dim");
        Self { dim, data }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self, KnowledgeError> {
        let dim = rows.first().map(Vec::len).unwrap_or(0);
        let mut data = Vec::with_capacity(rows.len() * dim);
        for row in rows {
            if row.len() != dim {
                return Err(KnowledgeError::DimensionMismatch { expected: dim, got: row.len() });
            }
            data.extend_from_slice(row);
        }
        Ok(Self { dim, data })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn rows(&self) -> usize {
        self.data.len().checked_div(self.dim).unwrap_or(0)
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn iter_rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks(self.dim.max(1))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Neighbor {
    pub row: usize,
    pub distance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlatIndex {
    embeddings: Matrix,
}

pub fn squared_l2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

pub fn build_index(embeddings: Matrix) -> Result<FlatIndex, KnowledgeError> {
    if embeddings.rows() == 0 {
        return Err(KnowledgeError::EmptyCorpus);
    }
    Ok(FlatIndex { embeddings })
}

impl FlatIndex {
    pub fn len(&self) -> usize {
        self.embeddings.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dim(&self) -> usize {
        self.embeddings.dim()
    }

    pub fn embeddings(&self) -> &Matrix {
        &self.embeddings
    }

    /// The `k` nearest rows, ascending by distance; equal distances keep row order.
    pub fn search(&self, query: &[f64], k: usize) -> Result<Vec<Neighbor>, KnowledgeError> {
        if query.len() != self.dim() {
            return Err(KnowledgeError::DimensionMismatch { expected: self.dim(), got: query.len() });
        }
        let mut all: Vec<Neighbor> = self
            .embeddings
            .iter_rows()
            .enumerate()
            .map(|(row, r)| Neighbor { row, distance: squared_l2(query, r) })
            .collect();
        all.sort_by(|a, b| a.distance.total_cmp(&b.distance).then(a.row.cmp(&b.row)));
        all.truncate(k);
        Ok(all)
    }
}
