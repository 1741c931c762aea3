//! Word-level saliency from input gradients.
//!
//! For token `i` with embedding `x_i` and loss gradient `g_i = dL_c/dx_i`,
//! the score is `|g_i . x_i|` and the attribution is the score normalized
//! over the sentence. When every score is zero the attribution falls back to
//! uniform.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::autodiff::{Tape, Tensor, Var};
use crate::data::Polarity;
use crate::model::{forward, forward_embedded, ForwardTrace, ModelError, Parameters};
use crate::scalar::Real;
use crate::training::classification_loss;

/// How the attribution depends on the parameters when used inside a loss.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GradientFlow {
    /// Gradients are recorded nodes; the loss differentiates through them.
    SecondOrder,
    /// Gradients are frozen constants; only the explicit `x_i` factor in the
    /// score carries parameter dependence.
    Detached,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Serialize", deserialize = "T: Deserialize<'de>"))]
pub struct SaliencyMap<T = f64> {
    pub tokens: Vec<usize>,
    pub target_class: Polarity,
    /// `g_i`, one `embed_dim` vector per token.
    pub gradients: Vec<Vec<T>>,
    pub gradient_norms: Vec<T>,
    pub scores: Vec<T>,
    pub alpha: Vec<T>,
    /// True when all scores were zero and `alpha` is uniform.
    pub uniform_fallback: bool,
}

impl<T: Real> SaliencyMap<T> {
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }
}

/// Normalizes nonnegative scores into a distribution, uniform when they sum
/// to zero. Returns the distribution and whether the fallback fired.
pub fn normalize_scores<T: Real>(scores: &[T]) -> (Vec<T>, bool) {
    let total: T = scores.iter().copied().sum();
    if total > T::zero() {
        (scores.iter().map(|&s| s / total).collect(), false)
    } else {
        let u = T::one() / T::lit(scores.len() as f64);
        (vec![u; scores.len()], true)
    }
}

/// Attribution recorded on a tape.
#[derive(Debug, Clone)]
pub struct SaliencyGraph<T = f64> {
    pub map: SaliencyMap<T>,
    /// `len x 1` node holding alpha; a constant under the uniform fallback.
    pub alpha: Var,
}

/// Builds the attribution for an existing forward pass and its scalar loss.
pub fn saliency_on_tape<T: Real>(
    tape: &mut Tape<T>,
    trace: &ForwardTrace<T>,
    loss: Var,
    target_class: Polarity,
    tokens: &[usize],
    flow: GradientFlow,
) -> Result<SaliencyGraph<T>, ModelError> {
    let x = trace.stacked;
    let (n, d) = (tape.shape(x)[0], tape.shape(x)[1]);
    let g = match flow {
        GradientFlow::SecondOrder => tape.grad_graph(loss, &[x])?[0],
        GradientFlow::Detached => {
            let g = tape.grad(loss, &[x])?.remove(0);
            tape.constant(g)
        }
    };
    let gx = tape.mul(g, x)?;
    let ones_d = tape.constant(Tensor::ones(&[d, 1]));
    let dots = tape.matmul(gx, ones_d)?;
    let scores = tape.abs(dots)?;
    let total = tape.sum(scores)?;

    let score_values = tape.value(scores).values().to_vec();
    let (alpha_values, fallback) = normalize_scores(&score_values);
    let alpha = if fallback {
        tape.constant(Tensor::matrix(n, 1, alpha_values.clone())?)
    } else {
        let denom = tape.broadcast(total, &[n, 1])?;
        tape.div(scores, denom)?
    };
    let alpha_values = if fallback {
        alpha_values
    } else {
        tape.value(alpha).values().to_vec()
    };

    let gv = tape.value(g);
    let gradients: Vec<Vec<T>> = (0..n).map(|i| gv.row(i).to_vec()).collect();
    let gradient_norms = gradients
        .iter()
        .map(|r| r.iter().map(|&v| v * v).sum::<T>().sqrt())
        .collect();
    Ok(SaliencyGraph {
        map: SaliencyMap {
            tokens: tokens.to_vec(),
            target_class,
            gradients,
            gradient_norms,
            scores: score_values,
            alpha: alpha_values,
            uniform_fallback: fallback,
        },
        alpha,
    })
}

/// `g_i = dL_c(label)/dx_i` for every token, in token order.
pub fn input_gradients<T: Real>(
    tokens: &[usize],
    aspect_span: [usize; 2],
    params: &Parameters<T>,
    label: Polarity,
) -> Result<Vec<Vec<T>>, ModelError> {
    let mut tape = Tape::new();
    let trace = forward(tokens, aspect_span, params, &mut tape)?;
    let loss = classification_loss(&mut tape, trace.logits, label)?;
    let grads = tape.grad(loss, &trace.input_embeddings)?;
    Ok(grads.into_iter().map(|g| g.into_values()).collect())
}

/// Saliency map of the loss at `label`.
pub fn saliency<T: Real>(
    tokens: &[usize],
    aspect_span: [usize; 2],
    params: &Parameters<T>,
    label: Polarity,
) -> Result<SaliencyMap<T>, ModelError> {
    let mut tape = Tape::new();
    let trace = forward(tokens, aspect_span, params, &mut tape)?;
    let loss = classification_loss(&mut tape, trace.logits, label)?;
    Ok(saliency_on_tape(&mut tape, &trace, loss, label, tokens, GradientFlow::Detached)?.map)
}

/// Explanation-time saliency: the loss is taken at the model's own
/// prediction. Returns the map and the predicted label.
pub fn explain<T: Real>(
    tokens: &[usize],
    aspect_span: [usize; 2],
    params: &Parameters<T>,
) -> Result<SaliencyMap<T>, ModelError> {
    let mut tape = Tape::new();
    let trace = forward(tokens, aspect_span, params, &mut tape)?;
    let label = crate::model::argmax_label(tape.value(trace.logits).values());
    let loss = classification_loss(&mut tape, trace.logits, label)?;
    Ok(saliency_on_tape(&mut tape, &trace, loss, label, tokens, GradientFlow::Detached)?.map)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TaylorCheckConfig {
    pub epsilon: f64,
    pub trials: usize,
    pub seed: u64,
}

impl Default for TaylorCheckConfig {
    fn default() -> Self {
        Self {
            epsilon: 1e-3,
            trials: 100,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TaylorReport {
    pub epsilon: f64,
    pub trials: usize,
    /// max |dL - g_i . delta|
    pub max_residual: f64,
    /// max |dL|
    pub max_abs_change: f64,
    /// max eps * ||g_i|| over perturbed tokens
    pub max_first_order_bound: f64,
    /// Curvature constant used in the violation test.
    pub curvature: f64,
    /// Trials with |dL| > eps ||g_i|| + C eps^2.
    pub violations: usize,
}

/// Perturbation probe shared by the model-backed check and tests.
///
/// `loss_at` evaluates the loss with token `i`'s embedding replaced;
/// `curvature[i]` is the constant `C` used for token `i`.
pub fn taylor_probe<F>(
    base: &[Vec<f64>],
    base_loss: f64,
    gradients: &[Vec<f64>],
    curvature: &[f64],
    config: &TaylorCheckConfig,
    mut loss_at: F,
) -> TaylorReport
where
    F: FnMut(usize, &[f64]) -> Option<f64>,
{
    assert!(config.epsilon >= 0.0 && config.trials >= 1);
    let eps = config.epsilon;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut report = TaylorReport {
        epsilon: eps,
        trials: config.trials,
        max_residual: 0.0,
        max_abs_change: 0.0,
        max_first_order_bound: 0.0,
        curvature: curvature.iter().copied().fold(0.0, f64::max),
        violations: 0,
    };
    for _ in 0..config.trials {
        let i = rng.gen_range(0..base.len());
        let d = base[i].len();
        let mut dir: Vec<f64> = (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let norm = dir.iter().map(|v| v * v).sum::<f64>().sqrt().max(f64::MIN_POSITIVE);
        let radius: f64 = rng.gen_range(0.5..=1.0);
        for v in &mut dir {
            *v *= eps * radius / norm;
        }
        let perturbed: Vec<f64> = base[i].iter().zip(&dir).map(|(a, b)| a + b).collect();
        let Some(l) = loss_at(i, &perturbed) else {
            report.violations += 1;
            continue;
        };
        let change = l - base_loss;
        let linear: f64 = gradients[i].iter().zip(&dir).map(|(g, d)| g * d).sum();
        let gnorm = gradients[i].iter().map(|v| v * v).sum::<f64>().sqrt();
        let bound = eps * gnorm;
        report.max_residual = report.max_residual.max((change - linear).abs());
        report.max_abs_change = report.max_abs_change.max(change.abs());
        report.max_first_order_bound = report.max_first_order_bound.max(bound);
        if change.abs() > bound + curvature[i] * eps * eps {
            report.violations += 1;
        }
    }
    report
}

/// Largest absolute eigenvalue of the per-token Hessian block
/// `d^2 L / dx_i^2`, by power iteration on Hessian-vector products.
pub fn hessian_block_norms(
    tokens: &[usize],
    aspect_span: [usize; 2],
    params: &Parameters<f64>,
    label: Polarity,
    iterations: usize,
) -> Result<Vec<f64>, ModelError> {
    let mut tape = Tape::new();
    let trace = forward(tokens, aspect_span, params, &mut tape)?;
    let loss = classification_loss(&mut tape, trace.logits, label)?;
    let grads = tape.grad_graph(loss, &trace.input_embeddings)?;
    let d = params.config.embed_dim;
    let mut out = Vec::with_capacity(tokens.len());
    for (i, &g) in grads.iter().enumerate() {
        let mut v: Vec<f64> = (0..d).map(|k| 1.0 + 0.1 * k as f64).collect();
        let mut estimate = 0.0;
        for _ in 0..iterations {
            let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm == 0.0 {
                estimate = 0.0;
                break;
            }
            let unit: Vec<f64> = v.iter().map(|x| x / norm).collect();
            let c = tape.constant(Tensor::matrix(1, d, unit)?);
            let gv = tape.dot(g, c)?;
            let hv = tape.grad(gv, &[trace.input_embeddings[i]])?.remove(0);
            estimate = hv.norm();
            v = hv.into_values();
        }
        out.push(estimate);
    }
    Ok(out)
}

/// Checks the first-order expansion of the loss around each token's
/// embedding. The curvature constant per token is the Hessian block norm,
/// twice the second-order Taylor coefficient.
pub fn taylor_check(
    tokens: &[usize],
    aspect_span: [usize; 2],
    params: &Parameters<f64>,
    label: Polarity,
    config: &TaylorCheckConfig,
) -> Result<TaylorReport, ModelError> {
    let mut tape = Tape::new();
    let trace = forward(tokens, aspect_span, params, &mut tape)?;
    let loss = classification_loss(&mut tape, trace.logits, label)?;
    let base_loss = tape.item(loss);
    let gradients: Vec<Vec<f64>> = tape
        .grad(loss, &trace.input_embeddings)?
        .into_iter()
        .map(Tensor::into_values)
        .collect();
    let base: Vec<Vec<f64>> = tokens
        .iter()
        .map(|&t| params.embedding_row(t).to_vec())
        .collect();
    let curvature = hessian_block_norms(tokens, aspect_span, params, label, 30)?;
    let d = params.config.embed_dim;
    let loss_at = |i: usize, row: &[f64]| -> Option<f64> {
        let rows: Vec<Tensor<f64>> = base
            .iter()
            .enumerate()
            .map(|(j, r)| {
                let v = if j == i { row.to_vec() } else { r.clone() };
                Tensor::matrix(1, d, v)
            })
            .collect::<Result<_, _>>()
            .ok()?;
        let mut tape = Tape::new();
        let trace = forward_embedded(rows, aspect_span, params, &mut tape).ok()?;
        let loss = classification_loss(&mut tape, trace.logits, label).ok()?;
        Some(tape.item(loss))
    };
    Ok(taylor_probe(
        &base, base_loss, &gradients, &curvature, config, loss_at,
    ))
}

/// One line of the saliency export.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SaliencyRecord {
    pub id: String,
    pub tokens: Vec<String>,
    pub aspect_span: [usize; 2],
    pub alpha: Vec<f64>,
    pub score: Vec<f64>,
    pub gradient_norm: Vec<f64>,
    pub predicted: Polarity,
    pub gold: Polarity,
}
