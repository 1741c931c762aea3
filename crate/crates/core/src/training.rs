//! Classification loss, gradient-correction loss and the training loop.
//!
//! The objective for a batch `B` with annotated subset `A` is
//!
//! ```text
//! L = mean_{B} L_c  +  lambda * mean_{A} L_g,      L_g = -sum_j mask_j alpha_j
//! ```
//!
//! where `alpha` is the saliency distribution of `L_c` at the gold label.
//! Under [`GradientFlow::SecondOrder`] the parameter gradient of `L_g` runs
//! through the input gradients themselves (double backpropagation).

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::attribution::{saliency_on_tape, GradientFlow};
use crate::autodiff::{AutodiffError, Tape, Tensor, Var};
use crate::data::{subsample_annotations, Corpus, Example, Polarity, Vocabulary};
use crate::metrics::{self, RankingPolicy, TrainedModel};
use crate::model::{forward, ModelConfig, ModelError, Parameters, DENSE_PARAMS, NUM_CLASSES};
use crate::scalar::Real;

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("invalid training config: {0}")]
    InvalidConfig(String),
    #[error("training split is empty")]
    EmptyCorpus,
    #[error("example {id}: {source}")]
    Example { id: String, source: ModelError },
    #[error(transparent)]
    Model(#[from] ModelError),
}

impl From<AutodiffError> for TrainError {
    fn from(e: AutodiffError) -> Self {
        TrainError::Model(ModelError::Autodiff(e))
    }
}

/// `-log P(gold)` via a stable log-softmax.
pub fn classification_loss<T: Real>(
    tape: &mut Tape<T>,
    logits: Var,
    gold: Polarity,
) -> Result<Var, AutodiffError> {
    let shape = tape.shape(logits).to_vec();
    let mut onehot = Tensor::zeros(&shape);
    if onehot.len() != NUM_CLASSES {
        return Err(AutodiffError::InvalidArgument(format!(
            "expected {NUM_CLASSES} logits, got shape {shape:?}"
        )));
    }
    let mut values = onehot.into_values();
    values[gold.index()] = T::one();
    onehot = Tensor::new(shape, values)?;
    let selector = tape.constant(onehot);
    let log_probs = tape.log_softmax(logits)?;
    let picked = tape.dot(log_probs, selector)?;
    tape.scale(picked, -T::one())
}

/// `-sum_j mask_j alpha_j` for a `len x 1` attribution node.
pub fn correction_loss<T: Real>(
    tape: &mut Tape<T>,
    alpha: Var,
    mask: &[T],
) -> Result<Var, AutodiffError> {
    let shape = tape.shape(alpha).to_vec();
    if shape.iter().product::<usize>() != mask.len() {
        return Err(AutodiffError::ShapeMismatch {
            op: "correction_loss",
            lhs: shape,
            rhs: vec![mask.len()],
        });
    }
    let m = tape.constant(Tensor::new(shape, mask.to_vec())?);
    let covered = tape.dot(alpha, m)?;
    tape.scale(covered, -T::one())
}

/// `l_c + lambda * l_g`
pub fn total_loss<T: Real>(
    tape: &mut Tape<T>,
    l_c: Var,
    l_g: Var,
    lambda: T,
) -> Result<Var, AutodiffError> {
    let weighted = tape.scale(l_g, lambda)?;
    tape.add(l_c, weighted)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub lambda: f64,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
    pub correction_mode: GradientFlow,
    pub annotated_fraction: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            lambda: 0.01,
            learning_rate: 1e-3,
            batch_size: 32,
            epochs: 20,
            seed: 0,
            correction_mode: GradientFlow::SecondOrder,
            annotated_fraction: 1.0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        let bad = |m: String| Err(TrainError::InvalidConfig(m));
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return bad(format!("lambda must be >= 0, got {}", self.lambda));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad(format!("learning_rate must be > 0, got {}", self.learning_rate));
        }
        if self.batch_size == 0 {
            return bad("batch_size must be >= 1".into());
        }
        if !(0.0..=1.0).contains(&self.annotated_fraction) {
            return bad(format!(
                "annotated_fraction must be in [0, 1], got {}",
                self.annotated_fraction
            ));
        }
        Ok(())
    }
}

/// Example encoded for training.
#[derive(Debug, Clone)]
pub struct Encoded {
    pub id: String,
    pub tokens: Vec<usize>,
    pub aspect_span: [usize; 2],
    pub gold: Polarity,
    /// Opinion mask visible to the loss.
    pub mask: Option<Vec<f64>>,
}

impl Encoded {
    pub fn new(example: &Example, vocab: &Vocabulary) -> Self {
        Self {
            id: example.id.clone(),
            tokens: vocab.encode(&example.tokens),
            aspect_span: example.aspect_span,
            gold: example.polarity,
            mask: example.training_mask(),
        }
    }
}

/// Parameter gradient: dense tensors plus a full embedding-table gradient.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients<T = f64> {
    pub dense: Vec<Tensor<T>>,
    pub embedding: Vec<T>,
}

impl<T: Real> Gradients<T> {
    pub fn zeros(params: &Parameters<T>) -> Self {
        Self {
            dense: params
                .dense()
                .iter()
                .map(|t| Tensor::zeros(t.shape()))
                .collect(),
            embedding: vec![T::zero(); params.embedding.len()],
        }
    }

    fn accumulate(&mut self, other: &Self) {
        for (a, b) in self.dense.iter_mut().zip(&other.dense) {
            let sum = a.zip_map(b, |x, y| x + y);
            *a = Tensor::new(a.shape().to_vec(), sum).expect("finite gradient sum");
        }
        for (a, &b) in self.embedding.iter_mut().zip(&other.embedding) {
            *a = *a + b;
        }
    }

    pub fn norm(&self) -> T {
        let dense: T = self
            .dense
            .iter()
            .flat_map(|t| t.values().iter())
            .map(|&v| v * v)
            .sum();
        let emb: T = self.embedding.iter().map(|&v| v * v).sum();
        (dense + emb).sqrt()
    }

    /// All entries in a fixed order: dense tensors, then embedding table.
    pub fn flatten(&self) -> Vec<T> {
        self.dense
            .iter()
            .flat_map(|t| t.values().iter().copied())
            .chain(self.embedding.iter().copied())
            .collect()
    }
}

/// Loss values and parameter gradient of one weighted example objective
/// `w_c * L_c + w_g * L_g`.
#[derive(Debug, Clone)]
pub struct ExampleStep<T = f64> {
    pub l_c: T,
    pub l_g: Option<T>,
    pub objective: T,
    pub logits: Vec<T>,
    pub grads: Gradients<T>,
}

/// Records the weighted objective for one example and returns its value and
/// tape handles. `L_g` is built only when `w_g > 0` and a mask is present.
fn build_objective<T: Real>(
    tape: &mut Tape<T>,
    params: &Parameters<T>,
    ex: &Encoded,
    w_c: T,
    w_g: T,
    flow: GradientFlow,
) -> Result<(crate::model::ForwardTrace<T>, Var, Var, Option<Var>), ModelError> {
    let trace = forward(&ex.tokens, ex.aspect_span, params, tape)?;
    let l_c = classification_loss(tape, trace.logits, ex.gold)?;
    let mut l_g = None;
    let mut objective = tape.scale(l_c, w_c)?;
    if let (true, Some(mask)) = (w_g > T::zero(), &ex.mask) {
        let sal = saliency_on_tape(tape, &trace, l_c, ex.gold, &ex.tokens, flow)?;
        let mask: Vec<T> = mask.iter().map(|&m| T::lit(m)).collect();
        let lg = correction_loss(tape, sal.alpha, &mask)?;
        objective = total_loss(tape, objective, lg, w_g)?;
        l_g = Some(lg);
    }
    Ok((trace, l_c, objective, l_g))
}

/// Value of `w_c * L_c + w_g * L_g` for one example.
pub fn example_objective<T: Real>(
    params: &Parameters<T>,
    ex: &Encoded,
    w_c: T,
    w_g: T,
    flow: GradientFlow,
) -> Result<T, ModelError> {
    let mut tape = Tape::new();
    let (_, _, objective, _) = build_objective(&mut tape, params, ex, w_c, w_g, flow)?;
    Ok(tape.item(objective))
}

/// Value and parameter gradient of `w_c * L_c + w_g * L_g` for one example.
pub fn example_step<T: Real>(
    params: &Parameters<T>,
    ex: &Encoded,
    w_c: T,
    w_g: T,
    flow: GradientFlow,
) -> Result<ExampleStep<T>, ModelError> {
    let mut tape = Tape::new();
    let (trace, l_c, objective, l_g) = build_objective(&mut tape, params, ex, w_c, w_g, flow)?;
    let mut wrt: Vec<Var> = trace.params.as_array().to_vec();
    wrt.extend(&trace.input_embeddings);
    let grads = tape.grad(objective, &wrt)?;

    let d = params.config.embed_dim;
    let mut embedding = vec![T::zero(); params.embedding.len()];
    for (&tok, g) in ex.tokens.iter().zip(&grads[DENSE_PARAMS..]) {
        for (e, &v) in embedding[tok * d..(tok + 1) * d].iter_mut().zip(g.values()) {
            *e = *e + v;
        }
    }
    Ok(ExampleStep {
        l_c: tape.item(l_c),
        l_g: l_g.map(|v| tape.item(v)),
        objective: tape.item(objective),
        logits: tape.value(trace.logits).values().to_vec(),
        grads: Gradients {
            dense: grads[..DENSE_PARAMS].to_vec(),
            embedding,
        },
    })
}

/// Losses of one batch under the averaging rule above.
#[derive(Debug, Clone, PartialEq)]
pub struct LossBreakdown<T = f64> {
    /// Mean classification loss over the batch.
    pub l_c: T,
    /// Mean correction loss over annotated examples (0 when none).
    pub l_g: T,
    pub total: T,
    pub annotated: Vec<bool>,
}

/// Summed gradient and loss breakdown of one batch.
pub fn batch_step<T: Real>(
    params: &Parameters<T>,
    batch: &[&Encoded],
    lambda: T,
    flow: GradientFlow,
) -> Result<(Gradients<T>, LossBreakdown<T>, Vec<Vec<T>>), TrainError> {
    let use_correction = lambda > T::zero();
    let annotated: Vec<bool> = batch
        .iter()
        .map(|e| use_correction && e.mask.is_some())
        .collect();
    let n_annotated = annotated.iter().filter(|&&a| a).count();
    let w_c = T::one() / T::lit(batch.len() as f64);
    let w_g = if n_annotated > 0 {
        lambda / T::lit(n_annotated as f64)
    } else {
        T::zero()
    };

    let mut grads = Gradients::zeros(params);
    let (mut sum_c, mut sum_g) = (T::zero(), T::zero());
    let mut logits = Vec::with_capacity(batch.len());
    for (ex, &ann) in batch.iter().zip(&annotated) {
        let step = example_step(params, ex, w_c, if ann { w_g } else { T::zero() }, flow)
            .map_err(|source| TrainError::Example {
                id: ex.id.clone(),
                source,
            })?;
        grads.accumulate(&step.grads);
        sum_c = sum_c + step.l_c;
        if let Some(lg) = step.l_g {
            sum_g = sum_g + lg;
        }
        logits.push(step.logits);
    }
    let l_c = sum_c * w_c;
    let l_g = if n_annotated > 0 {
        sum_g / T::lit(n_annotated as f64)
    } else {
        T::zero()
    };
    Ok((
        grads,
        LossBreakdown {
            l_c,
            l_g,
            total: l_c + lambda * l_g,
            annotated,
        },
        logits,
    ))
}

/// Adaptive-moment optimizer with bias correction and no weight decay.
#[derive(Debug, Clone)]
pub struct Adam<T = f64> {
    pub learning_rate: T,
    pub beta1: T,
    pub beta2: T,
    pub eps: T,
    step: i32,
    m: Vec<T>,
    v: Vec<T>,
}

impl<T: Real> Adam<T> {
    pub fn new(learning_rate: T) -> Self {
        Self {
            learning_rate,
            beta1: T::lit(0.9),
            beta2: T::lit(0.999),
            eps: T::lit(1e-8),
            step: 0,
            m: Vec::new(),
            v: Vec::new(),
        }
    }

    pub fn step(&mut self, params: &mut Parameters<T>, grads: &Gradients<T>) -> Result<(), TrainError> {
        let flat = grads.flatten();
        if self.m.is_empty() {
            self.m = vec![T::zero(); flat.len()];
            self.v = vec![T::zero(); flat.len()];
        }
        self.step += 1;
        let bc1 = T::one() - self.beta1.powi(self.step);
        let bc2 = T::one() - self.beta2.powi(self.step);
        let mut updates = Vec::with_capacity(flat.len());
        for (i, &g) in flat.iter().enumerate() {
            self.m[i] = self.beta1 * self.m[i] + (T::one() - self.beta1) * g;
            self.v[i] = self.beta2 * self.v[i] + (T::one() - self.beta2) * g * g;
            let m_hat = self.m[i] / bc1;
            let v_hat = self.v[i] / bc2;
            updates.push(self.learning_rate * m_hat / (v_hat.sqrt() + self.eps));
        }
        let mut offset = 0;
        let mut apply = |t: &mut Tensor<T>| -> Result<(), TrainError> {
            let new: Vec<T> = t
                .values()
                .iter()
                .zip(&updates[offset..offset + t.len()])
                .map(|(&p, &u)| p - u)
                .collect();
            offset += t.len();
            *t = Tensor::new(t.shape().to_vec(), new)?;
            Ok(())
        };
        for t in params.dense_mut() {
            apply(t)?;
        }
        apply(&mut params.embedding)?;
        Ok(())
    }
}

/// Metrics recorded after each epoch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub mean_l_c: f64,
    pub mean_l_g: f64,
    pub train_accuracy: f64,
    pub valid_accuracy: f64,
    pub valid_hit_rate: f64,
}

pub type TrainHistory = Vec<EpochRecord>;

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub final_params: Parameters<f64>,
    /// Parameters from the epoch with the best validation accuracy
    /// (earliest on ties); the final parameters when there is no
    /// validation split.
    pub best_params: Parameters<f64>,
    pub best_epoch: usize,
    pub history: TrainHistory,
    pub vocabulary: Vocabulary,
}

/// Trains on `corpus["train"]`, validating on `corpus["valid"]` when present.
///
/// `model_config.vocab_size` is taken from the corpus vocabulary. The
/// annotation fraction is applied to the training split with the run seed.
pub fn train(
    corpus: &Corpus,
    config: &TrainConfig,
    model_config: &ModelConfig,
) -> Result<TrainOutcome, TrainError> {
    train_with(corpus, config, model_config, |_, _| {})
}

/// As [`train`], calling `on_epoch` after every epoch with the record and
/// current parameters.
pub fn train_with<F>(
    corpus: &Corpus,
    config: &TrainConfig,
    model_config: &ModelConfig,
    mut on_epoch: F,
) -> Result<TrainOutcome, TrainError>
where
    F: FnMut(&EpochRecord, &Parameters<f64>),
{
    config.validate()?;
    let train_split = corpus.train();
    if train_split.is_empty() {
        return Err(TrainError::EmptyCorpus);
    }
    let vocab = corpus.vocabulary.clone();
    let model_config = ModelConfig {
        vocab_size: vocab.len(),
        ..model_config.clone()
    };
    let mut params = Parameters::<f64>::init(&model_config)?;

    let train_split = subsample_annotations(train_split, config.annotated_fraction, config.seed);
    let encoded: Vec<Encoded> = train_split.iter().map(|e| Encoded::new(e, &vocab)).collect();
    if config.lambda > 0.0 && encoded.iter().all(|e| e.mask.is_none()) {
        log::warn!("no annotated training examples; correction loss is inactive");
    }
    let valid = corpus.split("valid").unwrap_or(&[]);
    let policy = RankingPolicy::default();

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut adam = Adam::new(config.learning_rate);
    let mut order: Vec<usize> = (0..encoded.len()).collect();
    let mut history = Vec::with_capacity(config.epochs);
    let mut best = (f64::NEG_INFINITY, 0usize, params.clone());

    for epoch in 1..=config.epochs {
        order.shuffle(&mut rng);
        let (mut sum_c, mut sum_g, mut n_g_batches, mut correct) = (0.0, 0.0, 0usize, 0usize);
        for chunk in order.chunks(config.batch_size) {
            let batch: Vec<&Encoded> = chunk.iter().map(|&i| &encoded[i]).collect();
            let (grads, losses, logits) =
                batch_step(&params, &batch, config.lambda, config.correction_mode)?;
            sum_c += losses.l_c * batch.len() as f64;
            if losses.annotated.iter().any(|&a| a) {
                sum_g += losses.l_g;
                n_g_batches += 1;
            }
            correct += batch
                .iter()
                .zip(&logits)
                .filter(|(e, l)| crate::model::argmax_label(l) == e.gold)
                .count();
            adam.step(&mut params, &grads)?;
        }
        let (valid_accuracy, valid_hit_rate) = if valid.is_empty() {
            (f64::NAN, f64::NAN)
        } else {
            let model = TrainedModel::new(params.clone(), vocab.clone());
            metrics::quick_validation(&model, valid, &policy)?
        };
        let record = EpochRecord {
            epoch,
            mean_l_c: sum_c / encoded.len() as f64,
            mean_l_g: if n_g_batches > 0 {
                sum_g / n_g_batches as f64
            } else {
                0.0
            },
            train_accuracy: correct as f64 / encoded.len() as f64,
            valid_accuracy,
            valid_hit_rate,
        };
        log::info!(
            "epoch {epoch}: l_c {:.4} l_g {:.4} train acc {:.4} valid acc {:.4} hr {:.4}",
            record.mean_l_c,
            record.mean_l_g,
            record.train_accuracy,
            record.valid_accuracy,
            record.valid_hit_rate
        );
        let score = if valid.is_empty() { epoch as f64 } else { valid_accuracy };
        if score > best.0 {
            best = (score, epoch, params.clone());
        }
        on_epoch(&record, &params);
        history.push(record);
    }
    let (_, best_epoch, best_params) = best;
    Ok(TrainOutcome {
        final_params: params,
        best_params,
        best_epoch,
        history,
        vocabulary: vocab,
    })
}
