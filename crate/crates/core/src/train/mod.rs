//! Document-batched training with Adam and global-norm gradient clipping.
//!
//! Each epoch shuffles the documents (seeded), cuts them into batches of
//! whole documents, averages per-document gradients over the batch, clips
//! the global L2 norm and takes one Adam step. Per-document gradients are
//! computed in parallel against a frozen parameter snapshot and summed in
//! batch order, so results do not depend on thread scheduling.

mod config;

use std::path::PathBuf;
use std::time::Instant;

use log::{info, warn};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::corpus::Document;
use crate::embed::{embed_document, WordVectorStore};
use crate::net::{backward, forward, init_params, ModelParams, NetError};

pub use config::{parse_entries, ConfigError, Entry, TrainConfig};

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPSILON: f64 = 1e-8;

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("training corpus is empty")]
    EmptyCorpus,
    #[error("word vectors have dimension {vectors} but the model input dimension is {model}")]
    DimensionMismatch { vectors: usize, model: usize },
    #[error("document {0:?} has no labels")]
    Unlabeled(String),
    #[error("document {id:?}: {reason}")]
    InvalidDocument { id: String, reason: String },
    #[error("no document has an embeddable sentence")]
    NothingToTrain,
    #[error("adam step count must be at least 1")]
    InvalidStep,
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Net(#[from] NetError),
}

/// First and second moment estimates, shaped like the parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Moments {
    pub first: ModelParams,
    pub second: ModelParams,
}

impl Moments {
    pub fn zeros_like(params: &ModelParams) -> Self {
        Moments {
            first: ModelParams::zeros(params.dims),
            second: ModelParams::zeros(params.dims),
        }
    }
}

/// One Adam update at step `t` (1-based) with bias correction.
pub fn adam_step(
    params: &mut ModelParams,
    grads: &ModelParams,
    moments: &mut Moments,
    learning_rate: f64,
    t: u64,
) -> Result<(), TrainError> {
    if t == 0 {
        return Err(TrainError::InvalidStep);
    }
    params.check_same_shape(grads)?;
    params.check_same_shape(&moments.first)?;
    params.check_same_shape(&moments.second)?;
    let correction1 = 1.0 - ADAM_BETA1.powf(t as f64);
    let correction2 = 1.0 - ADAM_BETA2.powf(t as f64);
    let p_tensors = params.tensors_mut();
    let g_tensors = grads.named_tensors();
    let m_tensors = moments.first.tensors_mut();
    let v_tensors = moments.second.tensors_mut();
    for (((p, (_, g)), m), v) in p_tensors.into_iter().zip(g_tensors).zip(m_tensors).zip(v_tensors) {
        for k in 0..p.len() {
            m[k] = ADAM_BETA1 * m[k] + (1.0 - ADAM_BETA1) * g[k];
            v[k] = ADAM_BETA2 * v[k] + (1.0 - ADAM_BETA2) * g[k] * g[k];
            let m_hat = m[k] / correction1;
            let v_hat = v[k] / correction2;
            p[k] -= learning_rate * m_hat / (v_hat.sqrt() + ADAM_EPSILON);
        }
    }
    Ok(())
}

/// Scales `grads` so its global L2 norm is at most `max_norm`. Returns the
/// norm before clipping.
pub fn clip_global_norm(grads: &mut ModelParams, max_norm: f64) -> f64 {
    let norm = grads.l2_norm();
    if norm > max_norm {
        grads.scale(max_norm / norm);
    }
    norm
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport {
    /// Mean per-document loss of each epoch, measured before each batch's update.
    pub epoch_losses: Vec<f64>,
    /// Mean loss of the very first batch, before any update.
    pub first_batch_loss: f64,
    pub checkpoint: Option<PathBuf>,
    pub seconds: f64,
    /// Document passes over all epochs.
    pub documents_seen: usize,
    /// Documents left out because no sentence had a known word.
    pub skipped: Vec<String>,
}

/// A labeled document turned into network inputs.
#[derive(Debug, Clone)]
pub struct Example {
    pub id: String,
    pub embeddings: Vec<Vec<f64>>,
    pub targets: Vec<bool>,
}

/// Embeds labeled documents. Documents whose sentences are all
/// out-of-vocabulary come back in the second list.
pub fn prepare_examples(
    corpus: &[Document],
    vectors: &WordVectorStore,
) -> Result<(Vec<Example>, Vec<String>), TrainError> {
    let mut examples = Vec::with_capacity(corpus.len());
    let mut skipped = Vec::new();
    for doc in corpus {
        let labels = doc.labels.clone().ok_or_else(|| TrainError::Unlabeled(doc.id.clone()))?;
        doc.validate().map_err(|e| TrainError::InvalidDocument {
            id: doc.id.clone(),
            reason: e.to_string(),
        })?;
        let embedded = embed_document(vectors, doc);
        if embedded.iter().all(|e| e.fallback) {
            warn!("skipping document {:?}: no sentence has an in-vocabulary word", doc.id);
            skipped.push(doc.id.clone());
            continue;
        }
        examples.push(Example {
            id: doc.id.clone(),
            embeddings: embedded.into_iter().map(|e| e.values).collect(),
            targets: labels,
        });
    }
    Ok((examples, skipped))
}

/// Loss and gradient of one document.
pub fn example_gradient(params: &ModelParams, example: &Example) -> Result<(f64, ModelParams), NetError> {
    let trace = forward(params, &example.embeddings)?;
    backward(params, &trace, &example.targets)
}

pub fn train(
    corpus: &[Document],
    vectors: &WordVectorStore,
    config: &TrainConfig,
) -> Result<(ModelParams, TrainReport), TrainError> {
    config.validate()?;
    let initial = init_params(config.dims, config.seed)?;
    train_from(initial, corpus, vectors, config)
}

/// Trains starting from the given parameters instead of a fresh init.
pub fn train_from(
    initial: ModelParams,
    corpus: &[Document],
    vectors: &WordVectorStore,
    config: &TrainConfig,
) -> Result<(ModelParams, TrainReport), TrainError> {
    config.validate()?;
    if corpus.is_empty() {
        return Err(TrainError::EmptyCorpus);
    }
    if vectors.dim() != initial.dims.input {
        return Err(TrainError::DimensionMismatch {
            vectors: vectors.dim(),
            model: initial.dims.input,
        });
    }
    let started = Instant::now();
    let (examples, skipped) = prepare_examples(corpus, vectors)?;
    if examples.is_empty() {
        return Err(TrainError::NothingToTrain);
    }

    let mut params = initial;
    let mut moments = Moments::zeros_like(&params);
    let mut shuffle_rng = ChaCha8Rng::seed_from_u64(config.seed);
    shuffle_rng.set_stream(1);
    let mut order: Vec<usize> = (0..examples.len()).collect();
    let mut step = 0u64;
    let mut epoch_losses = Vec::with_capacity(config.epochs);
    let mut first_batch_loss = None;

    for epoch in 0..config.epochs {
        if config.shuffle {
            order.shuffle(&mut shuffle_rng);
        }
        let mut epoch_loss = 0.0;
        for batch in order.chunks(config.batch_size) {
            let snapshot = &params;
            let results: Vec<(f64, ModelParams)> = batch
                .par_iter()
                .map(|&i| example_gradient(snapshot, &examples[i]))
                .collect::<Result<_, _>>()?;

            let mut grads = ModelParams::zeros(params.dims);
            let mut batch_loss = 0.0;
            for (loss, g) in &results {
                batch_loss += loss;
                grads.add_assign(g)?;
            }
            grads.scale(1.0 / batch.len() as f64);
            first_batch_loss.get_or_insert(batch_loss / batch.len() as f64);
            epoch_loss += batch_loss;

            clip_global_norm(&mut grads, config.gradient_clip);
            step += 1;
            adam_step(&mut params, &grads, &mut moments, config.learning_rate, step)?;
        }
        let mean = epoch_loss / examples.len() as f64;
        info!("epoch {}/{}: mean loss {mean:.6}", epoch + 1, config.epochs);
        epoch_losses.push(mean);
    }

    let report = TrainReport {
        epoch_losses,
        first_batch_loss: first_batch_loss.unwrap_or(f64::NAN),
        checkpoint: None,
        seconds: started.elapsed().as_secs_f64(),
        documents_seen: examples.len() * config.epochs,
        skipped,
    };
    Ok((params, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::net::ModelDims;

    fn dims() -> ModelDims {
        ModelDims::new(2, 3, 2)
    }

    fn filled(value: f64) -> ModelParams {
        let mut p = ModelParams::zeros(dims());
        for t in p.tensors_mut() {
            t.iter_mut().for_each(|v| *v = value);
        }
        p
    }

    #[test]
    fn zero_gradient_leaves_params_and_decays_moments() {
        let mut params = init_params(dims(), 1).unwrap();
        let before = params.clone();
        let mut moments = Moments {
            first: filled(0.5),
            second: filled(0.25),
        };
        adam_step(&mut params, &ModelParams::zeros(dims()), &mut moments, 0.01, 3).unwrap();
        // the moments are non-zero, so a stale first moment still moves params
        assert_ne!(params, before);
        assert!(moments.first.values().all(|v| (v - 0.45).abs() < 1e-15));
        assert!(moments.second.values().all(|v| (v - 0.24975).abs() < 1e-15));

        let mut params = before.clone();
        let mut fresh = Moments::zeros_like(&params);
        adam_step(&mut params, &ModelParams::zeros(dims()), &mut fresh, 0.01, 1).unwrap();
        assert_eq!(params, before);
        assert!(fresh.first.values().all(|v| v == 0.0));
    }

    #[test]
    fn first_step_moves_by_learning_rate() {
        let mut params = ModelParams::zeros(dims());
        let mut grads = filled(0.3);
        grads.head.bias = -2.0;
        let mut moments = Moments::zeros_like(&params);
        adam_step(&mut params, &grads, &mut moments, 0.01, 1).unwrap();
        // m̂ = g and v̂ = g², so the step is lr · g / (|g| + ε)
        let expected = -0.01 * 0.3 / (0.3 + ADAM_EPSILON);
        assert!(params.encoder[0].forward.w_z.as_slice().iter().all(|&v| (v - expected).abs() < 1e-15));
        assert!((params.head.bias - 0.01 * 2.0 / (2.0 + ADAM_EPSILON)).abs() < 1e-15);
        assert!((expected + 0.01).abs() < 1e-9);
    }

    #[test]
    fn adam_is_pure_and_checks_inputs() {
        let start = init_params(dims(), 4).unwrap();
        let grads = init_params(dims(), 5).unwrap();
        let run = || {
            let mut p = start.clone();
            let mut m = Moments::zeros_like(&p);
            adam_step(&mut p, &grads, &mut m, 0.1, 1).unwrap();
            adam_step(&mut p, &grads, &mut m, 0.1, 2).unwrap();
            (p, m)
        };
        assert_eq!(run(), run());

        let mut p = start.clone();
        let mut m = Moments::zeros_like(&p);
        assert!(matches!(adam_step(&mut p, &grads, &mut m, 0.1, 0), Err(TrainError::InvalidStep)));
        let other = ModelParams::zeros(ModelDims::new(3, 3, 2));
        assert!(adam_step(&mut p, &other, &mut m, 0.1, 1).is_err());
    }

    #[test]
    fn clipping_bounds_the_norm() {
        let mut g = filled(10.0);
        let before = clip_global_norm(&mut g, 5.0);
        assert!(before > 5.0);
        assert!(g.l2_norm() <= 5.0 + 1e-12);

        let mut small = filled(1e-4);
        let norm = small.l2_norm();
        assert_eq!(clip_global_norm(&mut small, 5.0), norm);
        assert_eq!(small, filled(1e-4));
    }
}
