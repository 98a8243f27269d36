//! Word embedding tables and mean pooling.

use std::collections::HashMap;
use std::io::{BufRead, BufReader, Read};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

use super::MatchError;
use crate::text::tokenize;

/// Anything that maps a lowercase token to a vector.
pub trait TokenEmbedder: Send + Sync {
    fn dim(&self) -> usize;

    /// `None` for out-of-vocabulary tokens.
    fn embed(&self, token: &str) -> Option<Vec<f64>>;
}

/// Mean of the vectors of in-vocabulary tokens of `text`.
///
/// Unknown tokens are left out of the denominator; if no token is known the
/// result is the zero vector. The second value is the number of known tokens.
pub fn mean_pool(embedder: &dyn TokenEmbedder, text: &str) -> (Vec<f64>, usize) {
    let mut sum = vec![0.0; embedder.dim()];
    let mut known = 0usize;
    for token in tokenize(text) {
        if let Some(v) = embedder.embed(&token) {
            for (s, x) in sum.iter_mut().zip(&v) {
                *s += x;
            }
            known += 1;
        }
    }
    if known > 0 {
        let k = known as f64;
        sum.iter_mut().for_each(|s| *s /= k);
    }
    (sum, known)
}

/// In-memory embedding table, one `f32` row per word.
#[derive(Debug, Clone, Default)]
pub struct Embeddings {
    dim: usize,
    index: HashMap<String, usize>,
    words: Vec<String>,
    data: Vec<f32>,
}

impl Embeddings {
    pub fn new(dim: usize) -> Self {
        Self {
            dim,
            ..Self::default()
        }
    }

    /// Inserts or replaces the vector for `word`.
    pub fn insert(&mut self, word: impl Into<String>, vector: &[f32]) -> Result<(), MatchError> {
        if vector.len() != self.dim {
            return Err(MatchError::Dimension {
                expected: self.dim,
                found: vector.len(),
            });
        }
        let word = word.into();
        match self.index.get(&word) {
            Some(&row) => self.data[row * self.dim..(row + 1) * self.dim].copy_from_slice(vector),
            None => {
                self.index.insert(word.clone(), self.words.len());
                self.words.push(word);
                self.data.extend_from_slice(vector);
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn row(&self, word: &str) -> Option<&[f32]> {
        self.index
            .get(word)
            .map(|&r| &self.data[r * self.dim..(r + 1) * self.dim])
    }

    /// Reads the `word v1 ... vd` text format. The dimension is taken from
    /// the first line unless `expected_dim` is given.
    pub fn read<R: Read>(source: R, expected_dim: Option<usize>) -> Result<Self, MatchError> {
        let mut table: Option<Embeddings> = expected_dim.map(Embeddings::new);
        for (i, line) in BufReader::new(source).lines().enumerate() {
            let line = line?;
            let mut parts = line.split_whitespace();
            let Some(word) = parts.next() else {
                continue;
            };
            let values: Vec<f32> = parts
                .map(|p| p.parse::<f32>())
                .collect::<Result<_, _>>()
                .map_err(|e| MatchError::Format {
                    line: i + 1,
                    message: e.to_string(),
                })?;
            let table = table.get_or_insert_with(|| Embeddings::new(values.len()));
            if values.len() != table.dim {
                return Err(MatchError::Format {
                    line: i + 1,
                    message: format!("expected {} values, found {}", table.dim, values.len()),
                });
            }
            table.insert(word, &values)?;
        }
        Ok(table.unwrap_or_default())
    }

    pub fn from_path(path: impl AsRef<Path>, expected_dim: Option<usize>) -> Result<Self, MatchError> {
        Self::read(std::fs::File::open(path)?, expected_dim)
    }

    /// SHA-256 over words (sorted) and their vectors; identifies the table a
    /// trained model was fitted against.
    pub fn vocab_hash(&self) -> [u8; 32] {
        let mut order: Vec<usize> = (0..self.words.len()).collect();
        order.sort_by(|&a, &b| self.words[a].cmp(&self.words[b]));
        let mut hasher = Sha256::new();
        hasher.update((self.dim as u64).to_le_bytes());
        for r in order {
            hasher.update(self.words[r].as_bytes());
            hasher.update([0u8]);
            for x in &self.data[r * self.dim..(r + 1) * self.dim] {
                hasher.update(x.to_le_bytes());
            }
        }
        hasher.finalize().into()
    }
}

impl TokenEmbedder for Embeddings {
    fn dim(&self) -> usize {
        self.dim
    }

    fn embed(&self, token: &str) -> Option<Vec<f64>> {
        self.row(token).map(|r| r.iter().map(|&x| x as f64).collect())
    }
}

/// Deterministic pseudo-random vector per token. Every token is known, so
/// similarity reduces to weighted lexical overlap. Used when no embedding
/// file is supplied.
#[derive(Debug, Clone)]
pub struct HashingEmbedder {
    dim: usize,
    seed: u64,
}

impl HashingEmbedder {
    pub fn new(dim: usize, seed: u64) -> Self {
        Self { dim, seed }
    }
}

impl TokenEmbedder for HashingEmbedder {
    fn dim(&self) -> usize {
        self.dim
    }

    fn embed(&self, token: &str) -> Option<Vec<f64>> {
        let mut hasher = Sha256::new();
        hasher.update(self.seed.to_le_bytes());
        hasher.update(token.as_bytes());
        let digest: [u8; 32] = hasher.finalize().into();
        let mut rng = ChaCha8Rng::from_seed(digest);
        Some((0..self.dim).map(|_| rng.random_range(-1.0..1.0)).collect())
    }
}
