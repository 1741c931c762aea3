//! Aspect-conditioned additive-attention classifier.
//!
//! ```text
//! x_i    = E[token_i]                       (one tape leaf per token)
//! a      = mean(x_j for j in aspect span)
//! e_i    = v . tanh(W_c^T x_i + W_a^T a)
//! beta   = softmax(e)
//! logits = W_o^T (sum_i beta_i x_i) + b
//! ```
//!
//! Every token attends, aspect tokens included. The model has no notion of
//! position, so permuting tokens permutes the attention weights.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::autodiff::{softmax_values, AutodiffError, Tape, Tensor, Var};
use crate::data::{Polarity, Vocabulary};
use crate::scalar::Real;

pub const NUM_CLASSES: usize = 3;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("invalid model config: {0}")]
    InvalidConfig(String),
    #[error("aspect span [{start}, {end}) invalid for {len} tokens")]
    InvalidSpan { start: usize, end: usize, len: usize },
    #[error("sequence length {len} outside 1..={max}")]
    BadLength { len: usize, max: usize },
    #[error("token id {id} outside vocabulary of {vocab}")]
    TokenOutOfRange { id: usize, vocab: usize },
    #[error(transparent)]
    Autodiff(#[from] AutodiffError),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub vocab_size: usize,
    pub embed_dim: usize,
    pub hidden_dim: usize,
    pub num_classes: usize,
    pub max_len: usize,
    pub init_seed: u64,
}

impl ModelConfig {
    pub fn new(vocab_size: usize) -> Self {
        Self {
            vocab_size,
            embed_dim: 32,
            hidden_dim: 32,
            num_classes: NUM_CLASSES,
            max_len: 64,
            init_seed: 0,
        }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let bad = |m: &str| Err(ModelError::InvalidConfig(m.to_string()));
        if self.vocab_size == 0 {
            return bad("vocab_size must be at least 1");
        }
        if self.embed_dim == 0 || self.hidden_dim == 0 {
            return bad("embed_dim and hidden_dim must be at least 1");
        }
        if self.num_classes != NUM_CLASSES {
            return bad("num_classes must be 3");
        }
        if self.max_len == 0 {
            return bad("max_len must be at least 1");
        }
        Ok(())
    }
}

/// Learnable weights. Matrices are stored input-major so a row vector times
/// the matrix gives the projection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Serialize", deserialize = "T: Deserialize<'de>"))]
pub struct Parameters<T = f64> {
    pub config: ModelConfig,
    /// `vocab_size x embed_dim`
    pub embedding: Tensor<T>,
    /// `embed_dim x hidden_dim`
    pub w_context: Tensor<T>,
    /// `embed_dim x hidden_dim`
    pub w_aspect: Tensor<T>,
    /// `hidden_dim x 1`
    pub attn_vector: Tensor<T>,
    /// `embed_dim x 3`
    pub w_out: Tensor<T>,
    /// `1 x 3`
    pub b_out: Tensor<T>,
}

/// Number of dense (non-embedding) parameter tensors.
pub const DENSE_PARAMS: usize = 5;

fn uniform<T: Real>(rng: &mut ChaCha8Rng, rows: usize, cols: usize, bound: f64) -> Tensor<T> {
    let values = (0..rows * cols)
        .map(|_| T::lit(rng.gen_range(-bound..=bound)))
        .collect();
    Tensor::matrix(rows, cols, values).expect("finite init")
}

impl<T: Real> Parameters<T> {
    /// Seeded initialization: embeddings uniform in [-0.1, 0.1], projections
    /// uniform in +-1/sqrt(fan_in), zero bias.
    pub fn init(config: &ModelConfig) -> Result<Self, ModelError> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.init_seed);
        let (v, d, h) = (config.vocab_size, config.embed_dim, config.hidden_dim);
        let fan = |n: usize| 1.0 / (n as f64).sqrt();
        Ok(Self {
            config: config.clone(),
            embedding: uniform(&mut rng, v, d, 0.1),
            w_context: uniform(&mut rng, d, h, fan(d)),
            w_aspect: uniform(&mut rng, d, h, fan(d)),
            attn_vector: uniform(&mut rng, h, 1, fan(h)),
            w_out: uniform(&mut rng, d, NUM_CLASSES, fan(d)),
            b_out: Tensor::zeros(&[1, NUM_CLASSES]),
        })
    }

    pub fn dense(&self) -> [&Tensor<T>; DENSE_PARAMS] {
        [
            &self.w_context,
            &self.w_aspect,
            &self.attn_vector,
            &self.w_out,
            &self.b_out,
        ]
    }

    pub(crate) fn dense_mut(&mut self) -> [&mut Tensor<T>; DENSE_PARAMS] {
        [
            &mut self.w_context,
            &mut self.w_aspect,
            &mut self.attn_vector,
            &mut self.w_out,
            &mut self.b_out,
        ]
    }

    /// Shape and finiteness check against `config`.
    pub fn validate(&self) -> Result<(), ModelError> {
        self.config.validate()?;
        let c = &self.config;
        let expect = [
            (&self.embedding, [c.vocab_size, c.embed_dim]),
            (&self.w_context, [c.embed_dim, c.hidden_dim]),
            (&self.w_aspect, [c.embed_dim, c.hidden_dim]),
            (&self.attn_vector, [c.hidden_dim, 1]),
            (&self.w_out, [c.embed_dim, NUM_CLASSES]),
            (&self.b_out, [1, NUM_CLASSES]),
        ];
        for (t, shape) in expect {
            if t.shape() != shape {
                return Err(ModelError::Checkpoint(format!(
                    "tensor shape {:?} does not match config (expected {shape:?})",
                    t.shape()
                )));
            }
            if t.values().iter().any(|v| !v.is_finite()) {
                return Err(ModelError::Checkpoint("non-finite weight".into()));
            }
        }
        Ok(())
    }

    pub fn num_values(&self) -> usize {
        self.dense().iter().map(|t| t.len()).sum::<usize>() + self.embedding.len()
    }

    /// Every weight: dense tensors in [`Self::dense`] order, then the
    /// embedding table.
    pub fn flat_values(&self) -> Vec<T> {
        self.dense()
            .iter()
            .flat_map(|t| t.values().iter().copied())
            .chain(self.embedding.values().iter().copied())
            .collect()
    }

    /// Inverse of [`Self::flat_values`].
    pub fn with_flat_values(&self, flat: &[T]) -> Result<Self, ModelError> {
        if flat.len() != self.num_values() {
            return Err(ModelError::Checkpoint(format!(
                "expected {} weights, got {}",
                self.num_values(),
                flat.len()
            )));
        }
        let mut out = self.clone();
        let mut offset = 0;
        let mut fill = |t: &mut Tensor<T>| -> Result<(), ModelError> {
            let n = t.len();
            *t = Tensor::new(t.shape().to_vec(), flat[offset..offset + n].to_vec())?;
            offset += n;
            Ok(())
        };
        for t in out.dense_mut() {
            fill(t)?;
        }
        fill(&mut out.embedding)?;
        Ok(out)
    }

    pub fn embedding_row(&self, id: usize) -> &[T] {
        self.embedding.row(id)
    }

    pub fn bit_eq(&self, other: &Self) -> bool {
        self.config == other.config
            && self.embedding.bit_eq(&other.embedding)
            && self
                .dense()
                .iter()
                .zip(other.dense())
                .all(|(a, b)| a.bit_eq(b))
    }
}

/// Tape handles for the dense weights of one forward pass.
#[derive(Debug, Clone, Copy)]
pub struct ParamVars {
    pub w_context: Var,
    pub w_aspect: Var,
    pub attn_vector: Var,
    pub w_out: Var,
    pub b_out: Var,
}

impl ParamVars {
    pub fn register<T: Real>(tape: &mut Tape<T>, params: &Parameters<T>) -> Self {
        Self {
            w_context: tape.leaf(params.w_context.clone()),
            w_aspect: tape.leaf(params.w_aspect.clone()),
            attn_vector: tape.leaf(params.attn_vector.clone()),
            w_out: tape.leaf(params.w_out.clone()),
            b_out: tape.leaf(params.b_out.clone()),
        }
    }

    pub fn as_array(&self) -> [Var; DENSE_PARAMS] {
        [
            self.w_context,
            self.w_aspect,
            self.attn_vector,
            self.w_out,
            self.b_out,
        ]
    }
}

/// Output of one forward pass.
#[derive(Debug, Clone)]
pub struct ForwardTrace<T = f64> {
    /// `1 x 3`
    pub logits: Var,
    /// One `1 x embed_dim` leaf per token: the attribution surface.
    pub input_embeddings: Vec<Var>,
    /// The inputs stacked into `len x embed_dim`.
    pub stacked: Var,
    pub params: ParamVars,
    /// Softmax attention over all tokens.
    pub attention: Vec<T>,
}

fn check_inputs(config: &ModelConfig, tokens: &[usize], span: [usize; 2]) -> Result<(), ModelError> {
    let len = tokens.len();
    if len == 0 || len > config.max_len {
        return Err(ModelError::BadLength {
            len,
            max: config.max_len,
        });
    }
    let [start, end] = span;
    if start >= end || end > len {
        return Err(ModelError::InvalidSpan { start, end, len });
    }
    if let Some(&id) = tokens.iter().find(|&&id| id >= config.vocab_size) {
        return Err(ModelError::TokenOutOfRange {
            id,
            vocab: config.vocab_size,
        });
    }
    Ok(())
}

/// Runs the classifier on `tokens`, recording onto `tape`.
pub fn forward<T: Real>(
    tokens: &[usize],
    aspect_span: [usize; 2],
    params: &Parameters<T>,
    tape: &mut Tape<T>,
) -> Result<ForwardTrace<T>, ModelError> {
    check_inputs(&params.config, tokens, aspect_span)?;
    let rows: Vec<Tensor<T>> = tokens
        .iter()
        .map(|&id| Tensor::matrix(1, params.config.embed_dim, params.embedding_row(id).to_vec()))
        .collect::<Result<_, _>>()?;
    forward_embedded(rows, aspect_span, params, tape)
}

/// Like [`forward`] but with caller-supplied input embeddings (one
/// `1 x embed_dim` row per token). Used for perturbation checks.
pub fn forward_embedded<T: Real>(
    rows: Vec<Tensor<T>>,
    aspect_span: [usize; 2],
    params: &Parameters<T>,
    tape: &mut Tape<T>,
) -> Result<ForwardTrace<T>, ModelError> {
    let n = rows.len();
    let [start, end] = aspect_span;
    if n == 0 || n > params.config.max_len {
        return Err(ModelError::BadLength {
            len: n,
            max: params.config.max_len,
        });
    }
    if start >= end || end > n {
        return Err(ModelError::InvalidSpan { start, end, len: n });
    }
    let pv = ParamVars::register(tape, params);
    let inputs: Vec<Var> = rows.into_iter().map(|r| tape.leaf(r)).collect();
    let x = tape.concat(&inputs)?;

    let m = end - start;
    let aspect_rows = tape.gather(x, (start..end).collect())?;
    let ones_m = tape.constant(Tensor::ones(&[1, m]));
    let aspect_sum = tape.matmul(ones_m, aspect_rows)?;
    let aspect = tape.scale(aspect_sum, T::one() / T::lit(m as f64))?;

    let ctx = tape.matmul(x, pv.w_context)?;
    let asp = tape.matmul(aspect, pv.w_aspect)?;
    let ones_n = tape.constant(Tensor::ones(&[n, 1]));
    let asp_rows = tape.matmul(ones_n, asp)?;
    let pre = tape.add(ctx, asp_rows)?;
    let hidden = tape.tanh(pre)?;
    let scores = tape.matmul(hidden, pv.attn_vector)?;
    let beta = tape.softmax(scores)?;

    let beta_t = tape.transpose(beta)?;
    let pooled = tape.matmul(beta_t, x)?;
    let projected = tape.matmul(pooled, pv.w_out)?;
    let logits = tape.add(projected, pv.b_out)?;

    Ok(ForwardTrace {
        logits,
        input_embeddings: inputs,
        stacked: x,
        params: pv,
        attention: tape.value(beta).values().to_vec(),
    })
}

/// Class probabilities and the argmax label; ties go to the lower class
/// index (positive < negative < neutral).
#[derive(Debug, Clone, PartialEq)]
pub struct Prediction<T = f64> {
    pub label: Polarity,
    pub probabilities: Vec<T>,
}

pub fn argmax_label<T: Real>(logits: &[T]) -> Polarity {
    let mut best = 0;
    for (i, &v) in logits.iter().enumerate() {
        if v > logits[best] {
            best = i;
        }
    }
    Polarity::from_index(best).expect("three classes")
}

pub fn prediction_from_logits<T: Real>(logits: &[T]) -> Prediction<T> {
    Prediction {
        label: argmax_label(logits),
        probabilities: softmax_values(logits),
    }
}

pub fn predict<T: Real>(
    tokens: &[usize],
    aspect_span: [usize; 2],
    params: &Parameters<T>,
) -> Result<Prediction<T>, ModelError> {
    let mut tape = Tape::new();
    let trace = forward(tokens, aspect_span, params, &mut tape)?;
    Ok(prediction_from_logits(tape.value(trace.logits).values()))
}

pub const CHECKPOINT_FORMAT: &str = "iega-checkpoint";
pub const CHECKPOINT_VERSION: u32 = 1;

/// On-disk model: config, weights and the vocabulary they index.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format: String,
    pub version: u32,
    pub vocabulary: Vocabulary,
    pub params: Parameters<f64>,
}

impl Checkpoint {
    pub fn new(params: Parameters<f64>, vocabulary: Vocabulary) -> Self {
        Self {
            format: CHECKPOINT_FORMAT.to_string(),
            version: CHECKPOINT_VERSION,
            vocabulary,
            params,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("checkpoint serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, ModelError> {
        let ck: Self =
            serde_json::from_str(text).map_err(|e| ModelError::Checkpoint(e.to_string()))?;
        if ck.format != CHECKPOINT_FORMAT || ck.version != CHECKPOINT_VERSION {
            return Err(ModelError::Checkpoint(format!(
                "unsupported checkpoint {} v{}",
                ck.format, ck.version
            )));
        }
        ck.params.validate()?;
        if ck.vocabulary.len() != ck.params.config.vocab_size {
            return Err(ModelError::Checkpoint(format!(
                "vocabulary has {} entries but config says {}",
                ck.vocabulary.len(),
                ck.params.config.vocab_size
            )));
        }
        Ok(ck)
    }

    /// Writes to a sibling temp file and renames it into place.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), ModelError> {
        let path = path.as_ref();
        let tmp = path.with_extension("tmp");
        std::fs::write(&tmp, self.to_json())?;
        std::fs::rename(&tmp, path)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ModelError> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}
