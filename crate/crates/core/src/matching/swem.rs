//! Simple word-embedding model (SWEM) relation matcher.
//!
//! A head is represented by the mean of its in-vocabulary word vectors and
//! mapped to three independent group logits by a linear layer. Only the
//! projection is trained; the embedding table stays frozen.

use std::io::{Read, Write};
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::dataset::{GroupLabels, MatcherDataset};
use super::embeddings::{mean_pool, Embeddings};
use super::MatchError;

pub const DEFAULT_DIM: usize = 100;
const MAGIC: &[u8; 8] = b"KGSWEM\0\0";
const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub seed: u64,
    /// Required embedding dimension.
    pub dim: usize,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 20,
            batch_size: 64,
            learning_rate: 1e-3,
            seed: 0,
            dim: DEFAULT_DIM,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport {
    /// Mean binary cross-entropy over each epoch's mini-batches.
    pub epoch_losses: Vec<f64>,
}

#[derive(Clone)]
pub struct MatcherModel {
    embeddings: Arc<Embeddings>,
    /// Row-major 3 x dim, rows in (physical, social, event) order.
    weights: Vec<f64>,
    bias: [f64; 3],
    pub threshold: f64,
}

impl std::fmt::Debug for MatcherModel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("MatcherModel")
            .field("dim", &self.dim())
            .field("vocabulary", &self.embeddings.len())
            .field("bias", &self.bias)
            .field("threshold", &self.threshold)
            .finish()
    }
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

impl MatcherModel {
    pub fn from_parts(
        embeddings: Arc<Embeddings>,
        weights: Vec<f64>,
        bias: [f64; 3],
        threshold: f64,
    ) -> Result<Self, MatchError> {
        let dim = embeddings.dim();
        if weights.len() != 3 * dim {
            return Err(MatchError::Dimension {
                expected: 3 * dim,
                found: weights.len(),
            });
        }
        Ok(Self {
            embeddings,
            weights,
            bias,
            threshold,
        })
    }

    pub fn dim(&self) -> usize {
        self.embeddings.dim()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn bias(&self) -> [f64; 3] {
        self.bias
    }

    pub fn embeddings(&self) -> &Arc<Embeddings> {
        &self.embeddings
    }

    fn logits(&self, features: &[f64]) -> [f64; 3] {
        let d = self.dim();
        let mut out = self.bias;
        for (k, o) in out.iter_mut().enumerate() {
            *o += self.weights[k * d..(k + 1) * d]
                .iter()
                .zip(features)
                .map(|(w, x)| w * x)
                .sum::<f64>();
        }
        out
    }

    /// Independent sigmoid probabilities for (physical, social, event).
    pub fn predict_groups(&self, head: &str) -> [f64; 3] {
        let (features, _) = mean_pool(self.embeddings.as_ref(), head);
        self.logits(&features).map(sigmoid)
    }

    pub fn predict_labels(&self, head: &str) -> GroupLabels {
        GroupLabels::from_array(self.predict_groups(head).map(|p| p >= self.threshold))
    }

    pub fn save<W: Write>(&self, mut sink: W) -> Result<(), MatchError> {
        sink.write_all(MAGIC)?;
        sink.write_all(&FORMAT_VERSION.to_le_bytes())?;
        sink.write_all(&(self.dim() as u32).to_le_bytes())?;
        sink.write_all(&self.embeddings.vocab_hash())?;
        sink.write_all(&self.threshold.to_le_bytes())?;
        for w in &self.weights {
            sink.write_all(&w.to_le_bytes())?;
        }
        for b in &self.bias {
            sink.write_all(&b.to_le_bytes())?;
        }
        sink.flush()?;
        Ok(())
    }

    /// Loads projection weights saved by [`save`](Self::save). The
    /// embedding table must be the one the model was trained against.
    pub fn load<R: Read>(mut source: R, embeddings: Arc<Embeddings>) -> Result<Self, MatchError> {
        let mut magic = [0u8; 8];
        source.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(MatchError::ModelFile("not a matcher model file".into()));
        }
        let version = read_u32(&mut source)?;
        if version != FORMAT_VERSION {
            return Err(MatchError::ModelFile(format!("unsupported format version {version}")));
        }
        let dim = read_u32(&mut source)? as usize;
        if dim != embeddings.dim() {
            return Err(MatchError::Dimension {
                expected: dim,
                found: embeddings.dim(),
            });
        }
        let mut hash = [0u8; 32];
        source.read_exact(&mut hash)?;
        if hash != embeddings.vocab_hash() {
            return Err(MatchError::ModelFile(
                "embedding table does not match the one used for training".into(),
            ));
        }
        let threshold = read_f64(&mut source)?;
        let weights = (0..3 * dim)
            .map(|_| read_f64(&mut source))
            .collect::<Result<Vec<_>, _>>()?;
        let bias = [read_f64(&mut source)?, read_f64(&mut source)?, read_f64(&mut source)?];
        Self::from_parts(embeddings, weights, bias, threshold)
    }
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32, MatchError> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_f64<R: Read>(r: &mut R) -> Result<f64, MatchError> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(f64::from_le_bytes(b))
}

/// Binary cross-entropy averaged over the three outputs.
fn bce(probs: &[f64; 3], target: &[f64; 3]) -> f64 {
    const EPS: f64 = 1e-12;
    probs
        .iter()
        .zip(target)
        .map(|(p, y)| -(y * (p + EPS).ln() + (1.0 - y) * (1.0 - p + EPS).ln()))
        .sum::<f64>()
        / 3.0
}

/// Trains the projection layer with mini-batch Adam on binary cross-entropy.
/// Deterministic for a given seed.
pub fn train_swem_matcher(
    train: &MatcherDataset,
    embeddings: Arc<Embeddings>,
    config: &TrainConfig,
) -> Result<(MatcherModel, TrainReport), MatchError> {
    if train.is_empty() {
        return Err(MatchError::InvalidDataset("training set is empty".into()));
    }
    let dim = embeddings.dim();
    if dim != config.dim {
        return Err(MatchError::Dimension {
            expected: config.dim,
            found: dim,
        });
    }
    if config.batch_size == 0 {
        return Err(MatchError::InvalidDataset("batch size must be positive".into()));
    }

    let features: Vec<Vec<f64>> = train
        .iter()
        .map(|ex| mean_pool(embeddings.as_ref(), &ex.head).0)
        .collect();
    let targets: Vec<[f64; 3]> = train
        .iter()
        .map(|ex| ex.labels.as_array().map(|b| if b { 1.0 } else { 0.0 }))
        .collect();

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let bound = (6.0 / (dim + 3) as f64).sqrt();
    let weights: Vec<f64> = (0..3 * dim).map(|_| rng.random_range(-bound..bound)).collect();
    let mut model = MatcherModel::from_parts(embeddings, weights, [0.0; 3], 0.5)?;

    let n_params = 3 * dim + 3;
    let mut m = vec![0.0; n_params];
    let mut v = vec![0.0; n_params];
    let mut step = 0i32;
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut epoch_losses = Vec::with_capacity(config.epochs);

    for _ in 0..config.epochs {
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        let mut batches = 0usize;
        for batch in order.chunks(config.batch_size) {
            let mut grad = vec![0.0; n_params];
            let mut batch_loss = 0.0;
            for &i in batch {
                let x = &features[i];
                let probs = model.logits(x).map(sigmoid);
                batch_loss += bce(&probs, &targets[i]);
                for k in 0..3 {
                    // d(mean BCE)/d(logit) = (p - y) / 3
                    let delta = (probs[k] - targets[i][k]) / 3.0;
                    for (g, xj) in grad[k * dim..(k + 1) * dim].iter_mut().zip(x) {
                        *g += delta * xj;
                    }
                    grad[3 * dim + k] += delta;
                }
            }
            let scale = 1.0 / batch.len() as f64;
            step += 1;
            let bc1 = 1.0 - config.beta1.powi(step);
            let bc2 = 1.0 - config.beta2.powi(step);
            for p in 0..n_params {
                let g = grad[p] * scale;
                m[p] = config.beta1 * m[p] + (1.0 - config.beta1) * g;
                v[p] = config.beta2 * v[p] + (1.0 - config.beta2) * g * g;
                let update = config.learning_rate * (m[p] / bc1) / ((v[p] / bc2).sqrt() + config.epsilon);
                if p < 3 * dim {
                    model.weights[p] -= update;
                } else {
                    model.bias[p - 3 * dim] -= update;
                }
            }
            loss_sum += batch_loss * scale;
            batches += 1;
        }
        epoch_losses.push(loss_sum / batches as f64);
    }
    Ok((model, TrainReport { epoch_losses }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matching::dataset::MatcherExample;

    fn tiny_table() -> Arc<Embeddings> {
        let mut e = Embeddings::new(4);
        e.insert("tool", &[1.0, 0.0, 0.0, 0.0]).unwrap();
        e.insert("laugh", &[0.0, 1.0, 0.0, 0.0]).unwrap();
        e.insert("storm", &[0.0, 0.0, 1.0, 0.0]).unwrap();
        Arc::new(e)
    }

    fn tiny_config() -> TrainConfig {
        TrainConfig {
            dim: 4,
            epochs: 200,
            batch_size: 2,
            learning_rate: 0.05,
            ..TrainConfig::default()
        }
    }

    fn tiny_dataset() -> MatcherDataset {
        MatcherDataset::new(vec![
            MatcherExample {
                head: "tool".into(),
                labels: GroupLabels::from_array([true, false, false]),
            },
            MatcherExample {
                head: "laugh".into(),
                labels: GroupLabels::from_array([false, true, false]),
            },
            MatcherExample {
                head: "storm".into(),
                labels: GroupLabels::from_array([false, false, true]),
            },
        ])
        .unwrap()
    }

    #[test]
    fn learns_a_trivially_separable_set() {
        let (model, report) = train_swem_matcher(&tiny_dataset(), tiny_table(), &tiny_config()).unwrap();
        assert!(report.epoch_losses.last().unwrap() < &report.epoch_losses[0]);
        assert_eq!(model.predict_labels("tool"), GroupLabels::from_array([true, false, false]));
        assert_eq!(model.predict_labels("the storm"), GroupLabels::from_array([false, false, true]));
    }

    #[test]
    fn unknown_head_yields_sigmoid_of_bias() {
        let (model, _) = train_swem_matcher(&tiny_dataset(), tiny_table(), &tiny_config()).unwrap();
        let expected = model.bias().map(sigmoid);
        assert_eq!(model.predict_groups("zzz qqq"), expected);
    }

    #[test]
    fn rejects_empty_dataset_and_wrong_dimension() {
        let empty = MatcherDataset::new(vec![]).unwrap();
        assert!(matches!(
            train_swem_matcher(&empty, tiny_table(), &tiny_config()),
            Err(MatchError::InvalidDataset(_))
        ));
        assert!(matches!(
            train_swem_matcher(&tiny_dataset(), tiny_table(), &TrainConfig::default()),
            Err(MatchError::Dimension { expected: 100, found: 4 })
        ));
    }

    #[test]
    fn save_load_round_trip_and_hash_check() {
        let table = tiny_table();
        let (model, _) = train_swem_matcher(&tiny_dataset(), table.clone(), &tiny_config()).unwrap();
        let mut buf = Vec::new();
        model.save(&mut buf).unwrap();
        let loaded = MatcherModel::load(buf.as_slice(), table).unwrap();
        assert_eq!(loaded.weights(), model.weights());
        assert_eq!(loaded.bias(), model.bias());

        let mut other = Embeddings::new(4);
        other.insert("tool", &[0.5, 0.0, 0.0, 0.0]).unwrap();
        assert!(matches!(
            MatcherModel::load(buf.as_slice(), Arc::new(other)),
            Err(MatchError::ModelFile(_))
        ));
        assert!(matches!(
            MatcherModel::load(&b"garbage!"[..], tiny_table()),
            Err(MatchError::ModelFile(_))
        ));
    }
}
