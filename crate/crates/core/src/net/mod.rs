//! Sentence-level bidirectional GRU with a content/salience/novelty
//! logistic head, and its exact reverse-mode gradients.
//!
//! For sentence embeddings `x_0 … x_{n-1}`:
//!
//! ```text
//! h_j   = [→GRU(x_j, →h_{j-1}) ; ←GRU(x_j, ←h_{j+1})]      (zero initial states)
//! d     = tanh(W_doc · mean_j(h_j) + b_doc)
//! s_0   = 0
//! ℓ_j   = w_content·h_j + h_jᵀ W_salience d − h_jᵀ W_novelty tanh(s_j) + bias
//! p_j   = σ(clamp(ℓ_j, −30, 30))
//! s_j+1 = s_j + p_j h_j
//! L     = −(1/n) Σ_j [y_j ln p_j + (1 − y_j) ln(1 − p_j)]
//! ```
//!
//! With more than one layer, each layer's concatenated states are the next
//! layer's inputs. The head has no position inputs.

mod checkpoint;
mod gru;
mod model;
pub mod tensor;

use rand::distributions::{Distribution, Uniform};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use checkpoint::{load_params, read_params, save_params, write_params, CheckpointError, FORMAT_VERSION, MAGIC};
pub use gru::{gru_cell, GruCellParams, GruStep};
pub use model::{backward, classify, encode, forward, ForwardTrace, LOGIT_CLAMP};
pub use tensor::Matrix;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum NetError {
    #[error("{what}: expected length {expected}, found {found}")]
    ShapeMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("cannot run the network on an empty sentence sequence")]
    EmptySequence,
    #[error("all dimensions must be positive, got {0:?}")]
    InvalidDims(ModelDims),
}

impl NetError {
    pub(crate) fn check_len(what: &'static str, expected: usize, found: usize) -> Result<(), NetError> {
        if expected == found {
            Ok(())
        } else {
            Err(NetError::ShapeMismatch {
                what,
                expected,
                found,
            })
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelDims {
    pub input: usize,
    pub hidden: usize,
    pub doc: usize,
    /// Stacked bidirectional layers over the sentence sequence.
    pub layers: usize,
}

impl ModelDims {
    pub fn new(input: usize, hidden: usize, doc: usize) -> Self {
        ModelDims {
            input,
            hidden,
            doc,
            layers: 1,
        }
    }

    pub fn with_layers(mut self, layers: usize) -> Self {
        self.layers = layers;
        self
    }

    pub fn validate(&self) -> Result<(), NetError> {
        if self.input == 0 || self.hidden == 0 || self.doc == 0 || self.layers == 0 {
            return Err(NetError::InvalidDims(*self));
        }
        Ok(())
    }

    /// Width of a concatenated bidirectional state.
    pub fn state(&self) -> usize {
        2 * self.hidden
    }

    fn layer_input(&self, layer: usize) -> usize {
        if layer == 0 {
            self.input
        } else {
            self.state()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BiGruLayer {
    pub forward: GruCellParams,
    pub backward: GruCellParams,
}

/// The logistic head. It holds exactly these six tensors; there are no
/// position parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifierParams {
    pub w_content: Vec<f64>,
    pub w_salience: Matrix,
    pub w_novelty: Matrix,
    pub w_doc: Matrix,
    pub b_doc: Vec<f64>,
    pub bias: f64,
}

impl ClassifierParams {
    pub fn zeros(state_dim: usize, doc_dim: usize) -> Self {
        ClassifierParams {
            w_content: vec![0.0; state_dim],
            w_salience: Matrix::zeros(state_dim, doc_dim),
            w_novelty: Matrix::zeros(state_dim, state_dim),
            w_doc: Matrix::zeros(doc_dim, state_dim),
            b_doc: vec![0.0; doc_dim],
            bias: 0.0,
        }
    }

    pub fn state_dim(&self) -> usize {
        self.w_content.len()
    }

    pub fn doc_dim(&self) -> usize {
        self.b_doc.len()
    }

    pub fn tensors(&self) -> [(&'static str, &[f64]); 6] {
        [
            ("w_content", &self.w_content),
            ("w_salience", self.w_salience.as_slice()),
            ("w_novelty", self.w_novelty.as_slice()),
            ("w_doc", self.w_doc.as_slice()),
            ("b_doc", &self.b_doc),
            ("bias", std::slice::from_ref(&self.bias)),
        ]
    }

    pub fn tensors_mut(&mut self) -> [&mut [f64]; 6] {
        [
            &mut self.w_content,
            self.w_salience.as_mut_slice(),
            self.w_novelty.as_mut_slice(),
            self.w_doc.as_mut_slice(),
            &mut self.b_doc,
            std::slice::from_mut(&mut self.bias),
        ]
    }
}

/// Every trainable tensor of the model. Gradients use the same type.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub dims: ModelDims,
    pub encoder: Vec<BiGruLayer>,
    pub head: ClassifierParams,
}

impl ModelParams {
    pub fn zeros(dims: ModelDims) -> Self {
        let encoder = (0..dims.layers)
            .map(|l| BiGruLayer {
                forward: GruCellParams::zeros(dims.layer_input(l), dims.hidden),
                backward: GruCellParams::zeros(dims.layer_input(l), dims.hidden),
            })
            .collect();
        ModelParams {
            dims,
            encoder,
            head: ClassifierParams::zeros(dims.state(), dims.doc),
        }
    }

    /// Zeroes every head tensor, leaving the encoder as is.
    pub fn zero_head(&mut self) {
        self.head = ClassifierParams::zeros(self.dims.state(), self.dims.doc);
    }

    /// Named tensors in checkpoint order: encoder layers (forward cell then
    /// backward cell), then the head.
    pub fn named_tensors(&self) -> Vec<(String, &[f64])> {
        let mut out = Vec::new();
        for (l, layer) in self.encoder.iter().enumerate() {
            for (dir, cell) in [("forward", &layer.forward), ("backward", &layer.backward)] {
                for (name, t) in cell.tensors() {
                    out.push((format!("encoder.{l}.{dir}.{name}"), t));
                }
            }
        }
        for (name, t) in self.head.tensors() {
            out.push((format!("head.{name}"), t));
        }
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out: Vec<&mut [f64]> = Vec::new();
        for layer in &mut self.encoder {
            out.extend(layer.forward.tensors_mut());
            out.extend(layer.backward.tensors_mut());
        }
        out.extend(self.head.tensors_mut());
        out
    }

    pub fn num_values(&self) -> usize {
        self.named_tensors().iter().map(|(_, t)| t.len()).sum()
    }

    pub fn values(&self) -> impl Iterator<Item = f64> + '_ {
        self.named_tensors().into_iter().flat_map(|(_, t)| t.iter().copied())
    }

    pub fn l2_norm(&self) -> f64 {
        self.values().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn scale(&mut self, factor: f64) {
        for t in self.tensors_mut() {
            t.iter_mut().for_each(|v| *v *= factor);
        }
    }

    /// `self += other`, tensor by tensor.
    pub fn add_assign(&mut self, other: &ModelParams) -> Result<(), NetError> {
        self.check_same_shape(other)?;
        for (dst, (_, src)) in self.tensors_mut().into_iter().zip(other.named_tensors()) {
            dst.iter_mut().zip(src).for_each(|(d, s)| *d += s);
        }
        Ok(())
    }

    pub fn check_same_shape(&self, other: &ModelParams) -> Result<(), NetError> {
        NetError::check_len("layer count", self.dims.layers, other.dims.layers)?;
        NetError::check_len("input dim", self.dims.input, other.dims.input)?;
        NetError::check_len("hidden dim", self.dims.hidden, other.dims.hidden)?;
        NetError::check_len("doc dim", self.dims.doc, other.dims.doc)
    }

    pub fn is_finite(&self) -> bool {
        self.values().all(f64::is_finite)
    }
}

/// Glorot-uniform bound for a tensor with the given fan-in and fan-out.
pub fn glorot_bound(fan_in: usize, fan_out: usize) -> f64 {
    (6.0 / (fan_in + fan_out) as f64).sqrt()
}

/// Matrices ~ U(−a, a) with `a = sqrt(6 / (fan_in + fan_out))`, biases zero.
/// `w_content` is treated as a 1 × state matrix. Deterministic in `seed`.
pub fn init_params(dims: ModelDims, seed: u64) -> Result<ModelParams, NetError> {
    dims.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut params = ModelParams::zeros(dims);
    let mut fill = |t: &mut [f64], fan_in: usize, fan_out: usize| {
        let a = glorot_bound(fan_in, fan_out);
        let dist = Uniform::new(-a, a);
        t.iter_mut().for_each(|v| *v = dist.sample(&mut rng));
    };
    for layer in &mut params.encoder {
        for cell in [&mut layer.forward, &mut layer.backward] {
            let (i, h) = (cell.input_dim(), cell.hidden_dim());
            for w in [&mut cell.w_z, &mut cell.w_r, &mut cell.w_h] {
                fill(w.as_mut_slice(), i, h);
            }
            for u in [&mut cell.u_z, &mut cell.u_r, &mut cell.u_h] {
                fill(u.as_mut_slice(), h, h);
            }
        }
    }
    let (state, doc) = (dims.state(), dims.doc);
    let head = &mut params.head;
    fill(&mut head.w_content, state, 1);
    fill(head.w_salience.as_mut_slice(), doc, state);
    fill(head.w_novelty.as_mut_slice(), state, state);
    fill(head.w_doc.as_mut_slice(), state, doc);
    Ok(params)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn init_is_deterministic_and_bounded() {
        let dims = ModelDims::new(3, 4, 5).with_layers(2);
        let a = init_params(dims, 7).unwrap();
        let b = init_params(dims, 7).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, init_params(dims, 8).unwrap());

        for layer in &a.encoder {
            for cell in [&layer.forward, &layer.backward] {
                assert!(cell.b_z.iter().chain(&cell.b_r).chain(&cell.b_h).all(|&b| b == 0.0));
                let wa = glorot_bound(cell.input_dim(), 4);
                assert!(cell.w_h.as_slice().iter().all(|v| v.abs() <= wa));
                let ua = glorot_bound(4, 4);
                assert!(cell.u_r.as_slice().iter().all(|v| v.abs() <= ua));
            }
        }
        assert_eq!(a.encoder[1].forward.input_dim(), 8);
        assert!(a.head.b_doc.iter().all(|&b| b == 0.0));
        assert_eq!(a.head.bias, 0.0);
        let ca = glorot_bound(8, 1);
        assert!(a.head.w_content.iter().all(|v| v.abs() <= ca));
        let sa = glorot_bound(5, 8);
        assert!(a.head.w_salience.as_slice().iter().all(|v| v.abs() <= sa));
        assert!(a.head.w_salience.as_slice().iter().any(|&v| v != 0.0));
    }

    #[test]
    fn head_has_exactly_six_tensors() {
        let p = init_params(ModelDims::new(2, 2, 2), 1).unwrap();
        let head: Vec<_> = p
            .named_tensors()
            .into_iter()
            .filter(|(n, _)| n.starts_with("head."))
            .map(|(n, _)| n)
            .collect();
        assert_eq!(
            head,
            ["head.w_content", "head.w_salience", "head.w_novelty", "head.w_doc", "head.b_doc", "head.bias"]
        );
        assert_eq!(p.num_values(), 2 * 30 + 4 + 8 + 16 + 8 + 2 + 1);
    }

    #[test]
    fn invalid_dims_are_rejected() {
        assert!(init_params(ModelDims::new(0, 2, 2), 1).is_err());
        assert!(init_params(ModelDims::new(2, 2, 2).with_layers(0), 1).is_err());
    }
}
