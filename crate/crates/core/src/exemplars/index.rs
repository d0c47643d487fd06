//! Exact (brute-force) L2 nearest-neighbour index over contiguous storage.

use std::collections::HashSet;

use super::{ExemplarError, Result};
use crate::scalar::Scalar;

/// One search result.
#[derive(Debug, Clone, PartialEq)]
pub struct Hit {
    pub id: String,
    /// Insertion position in the index.
    pub position: usize,
    pub distance: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FlatIndex<F> {
    dimension: usize,
    ids: Vec<String>,
    id_set: HashSet<String>,
    data: Vec<F>,
}

impl<F: Scalar> FlatIndex<F> {
    pub fn new(dimension: usize) -> Self {
        assert!(dimension > 0, "index dimension must be positive");
        FlatIndex { dimension, ids: Vec::new(), id_set: HashSet::new(), data: Vec::new() }
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn vector(&self, position: usize) -> &[F] {
        &self.data[position * self.dimension..(position + 1) * self.dimension]
    }

    pub(crate) fn raw_data(&self) -> &[F] {
        &self.data
    }

    pub fn insert(&mut self, id: &str, vector: &[F]) -> Result<()> {
        if vector.len() != self.dimension {
            return Err(ExemplarError::DimensionMismatch {
                id: id.to_string(),
                expected: self.dimension,
                found: vector.len(),
            });
        }
        if !self.id_set.insert(id.to_string()) {
            return Err(ExemplarError::DuplicateId(id.to_string()));
        }
        self.ids.push(id.to_string());
        self.data.extend_from_slice(vector);
        Ok(())
    }

    /// Euclidean distance, accumulated in `f64` over eight fixed lanes.
    pub fn distance(a: &[F], b: &[F]) -> f64 {
        let mut lanes = [0.0f64; 8];
        let (ca, cb) = (a.chunks_exact(8), b.chunks_exact(8));
        let tail: f64 = ca.remainder().iter().zip(cb.remainder()).map(|(x, y)| (x.as_f64() - y.as_f64()).powi(2)).sum();
        for (xa, xb) in ca.zip(cb) {
            for l in 0..8 {
                let d = xa[l].as_f64() - xb[l].as_f64();
                lanes[l] += d * d;
            }
        }
        (lanes.iter().sum::<f64>() + tail).sqrt()
    }

    /// The `min(k, len)` nearest entries, ascending by distance, ties by insertion order.
    pub fn search(&self, query: &[F], k: usize) -> Result<Vec<Hit>> {
        if query.len() != self.dimension {
            return Err(ExemplarError::Argument(format!(
                "query dimension {} does not match index dimension {}",
                query.len(),
                self.dimension
            )));
        }
        if k == 0 {
            return Err(ExemplarError::Argument("k must be at least 1".into()));
        }
        let mut scored: Vec<(f64, usize)> = self
            .data
            .chunks_exact(self.dimension)
            .enumerate()
            .map(|(pos, v)| (Self::distance(query, v), pos))
            .collect();
        let k = k.min(scored.len());
        let by_key = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
        if k < scored.len() {
            scored.select_nth_unstable_by(k - 1, by_key);
            scored.truncate(k);
        }
        scored.sort_unstable_by(by_key);
        Ok(scored
            .into_iter()
            .map(|(distance, position)| Hit { id: self.ids[position].clone(), position, distance })
            .collect())
    }
}
