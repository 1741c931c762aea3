//! Classification and explanation-faithfulness metrics.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::attribution::explain;
use crate::data::{Example, Polarity, Vocabulary};
use crate::model::{predict, ModelError, Parameters};
use crate::scalar::Real;

pub const AOPC_VARIANT: &str = "accuracy-drop/token-removal/m=1..k";

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("no examples to evaluate")]
    Empty,
    #[error("predictions ({predictions}) and golds ({golds}) differ in length")]
    LengthMismatch { predictions: usize, golds: usize },
    #[error("no example has a gold opinion token surviving the ranking filter")]
    NoScorable,
    #[error("invalid ranking policy: {0}")]
    InvalidPolicy(String),
    #[error("example {id}: {source}")]
    Model { id: String, source: ModelError },
}

impl From<MetricsError> for crate::training::TrainError {
    fn from(e: MetricsError) -> Self {
        match e {
            MetricsError::Model { source, .. } => source.into(),
            other => crate::training::TrainError::InvalidConfig(other.to_string()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RankingPolicy {
    pub exclude_aspect_tokens: bool,
    pub k: usize,
}

impl Default for RankingPolicy {
    fn default() -> Self {
        Self {
            exclude_aspect_tokens: true,
            k: 5,
        }
    }
}

impl RankingPolicy {
    pub fn validate(&self) -> Result<(), MetricsError> {
        if self.k == 0 {
            return Err(MetricsError::InvalidPolicy("k must be >= 1".into()));
        }
        Ok(())
    }
}

/// Accuracy and macro-F1. A class absent from both predictions and golds
/// contributes an F1 of 0.
pub fn accuracy_and_macro_f1(
    predictions: &[Polarity],
    golds: &[Polarity],
) -> Result<(f64, f64), MetricsError> {
    if predictions.len() != golds.len() {
        return Err(MetricsError::LengthMismatch {
            predictions: predictions.len(),
            golds: golds.len(),
        });
    }
    if golds.is_empty() {
        return Err(MetricsError::Empty);
    }
    let mut confusion = [[0usize; 3]; 3];
    for (p, g) in predictions.iter().zip(golds) {
        confusion[g.index()][p.index()] += 1;
    }
    let correct: usize = (0..3).map(|c| confusion[c][c]).sum();
    let mut f1_sum = 0.0;
    for c in 0..3 {
        let tp = confusion[c][c];
        let fp: usize = (0..3).filter(|&g| g != c).map(|g| confusion[g][c]).sum();
        let fn_: usize = (0..3).filter(|&p| p != c).map(|p| confusion[c][p]).sum();
        let denom = 2 * tp + fp + fn_;
        if denom > 0 {
            f1_sum += (2 * tp) as f64 / denom as f64;
        }
    }
    Ok((correct as f64 / golds.len() as f64, f1_sum / 3.0))
}

/// Token indices by descending `alpha`, ties to the earlier position.
pub fn rank_tokens<T: Real>(alpha: &[T], aspect_span: [usize; 2], policy: &RankingPolicy) -> Vec<usize> {
    let mut order: Vec<usize> = (0..alpha.len())
        .filter(|&i| !(policy.exclude_aspect_tokens && i >= aspect_span[0] && i < aspect_span[1]))
        .collect();
    order.sort_by(|&a, &b| alpha[b].partial_cmp(&alpha[a]).unwrap_or(std::cmp::Ordering::Equal));
    order
}

/// 1-based rank of the best-ranked gold token, `None` when no gold token
/// appears in the ranking.
pub fn best_gold_rank(ranking: &[usize], gold: &[usize]) -> Option<usize> {
    ranking.iter().position(|i| gold.contains(i)).map(|p| p + 1)
}

/// Mean of `f(best rank)` over scorable examples, with the skipped count.
fn mean_over_ranked(
    rankings: &[Vec<usize>],
    gold: &[Vec<usize>],
    f: impl Fn(usize) -> f64,
) -> Result<(f64, usize), MetricsError> {
    if rankings.len() != gold.len() {
        return Err(MetricsError::LengthMismatch {
            predictions: rankings.len(),
            golds: gold.len(),
        });
    }
    let (mut sum, mut n, mut skipped) = (0.0, 0usize, 0usize);
    for (r, g) in rankings.iter().zip(gold) {
        match best_gold_rank(r, g) {
            Some(rank) => {
                sum += f(rank);
                n += 1;
            }
            None => skipped += 1,
        }
    }
    if n == 0 {
        return Err(MetricsError::NoScorable);
    }
    Ok((sum / n as f64, skipped))
}

/// Mean reciprocal rank of the best gold opinion token.
pub fn mrr(rankings: &[Vec<usize>], gold: &[Vec<usize>]) -> Result<f64, MetricsError> {
    mean_over_ranked(rankings, gold, |r| 1.0 / r as f64).map(|(v, _)| v)
}

/// Fraction of scorable examples with a gold opinion token in the top `k`.
pub fn hit_rate(rankings: &[Vec<usize>], gold: &[Vec<usize>], k: usize) -> Result<f64, MetricsError> {
    mean_over_ranked(rankings, gold, |r| if r <= k { 1.0 } else { 0.0 }).map(|(v, _)| v)
}

/// Anything that classifies aspect-marked token sequences and explains its
/// prediction.
pub trait Classifier {
    fn predict(&self, tokens: &[String], aspect_span: [usize; 2]) -> Result<Polarity, ModelError>;

    /// Predicted label and its attribution distribution over tokens.
    fn attribution(
        &self,
        tokens: &[String],
        aspect_span: [usize; 2],
    ) -> Result<(Polarity, Vec<f64>), ModelError>;
}

/// Parameters with the vocabulary used to encode string tokens.
#[derive(Debug, Clone)]
pub struct TrainedModel {
    pub params: Parameters<f64>,
    pub vocabulary: Vocabulary,
}

impl TrainedModel {
    pub fn new(params: Parameters<f64>, vocabulary: Vocabulary) -> Self {
        Self { params, vocabulary }
    }
}

impl Classifier for TrainedModel {
    fn predict(&self, tokens: &[String], aspect_span: [usize; 2]) -> Result<Polarity, ModelError> {
        let ids = self.vocabulary.encode(tokens);
        Ok(predict(&ids, aspect_span, &self.params)?.label)
    }

    fn attribution(
        &self,
        tokens: &[String],
        aspect_span: [usize; 2],
    ) -> Result<(Polarity, Vec<f64>), ModelError> {
        let ids = self.vocabulary.encode(tokens);
        let map = explain(&ids, aspect_span, &self.params)?;
        Ok((map.target_class, map.alpha))
    }
}

/// Removes the positions in `remove` (none inside the aspect span) and
/// remaps the span.
pub fn delete_tokens(
    tokens: &[String],
    aspect_span: [usize; 2],
    remove: &[usize],
) -> (Vec<String>, [usize; 2]) {
    let kept: Vec<String> = tokens
        .iter()
        .enumerate()
        .filter(|(i, _)| !remove.contains(i))
        .map(|(_, t)| t.clone())
        .collect();
    let shift = remove.iter().filter(|&&i| i < aspect_span[0]).count();
    let start = aspect_span[0] - shift;
    (kept, [start, start + aspect_span[1] - aspect_span[0]])
}

/// Keeps the positions in `keep` plus the aspect span, in original order.
pub fn keep_tokens(
    tokens: &[String],
    aspect_span: [usize; 2],
    keep: &[usize],
) -> (Vec<String>, [usize; 2]) {
    let remove: Vec<usize> = (0..tokens.len())
        .filter(|i| !keep.contains(i) && !(aspect_span[0]..aspect_span[1]).contains(i))
        .collect();
    delete_tokens(tokens, aspect_span, &remove)
}

/// Per-example evaluation outcome.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExampleDetail {
    pub id: String,
    pub gold: Polarity,
    pub predicted: Polarity,
    pub ranking: Vec<usize>,
    /// 1-based best gold rank; `None` when the example is not scorable.
    pub best_gold_rank: Option<usize>,
    pub hit: Option<bool>,
    /// Predictions after deleting the top 1..=k tokens; `None` when the
    /// example has too little context to delete from.
    pub deletion_predictions: Option<Vec<Polarity>>,
    pub post_hoc_prediction: Polarity,
}

fn model_err(id: &str) -> impl FnOnce(ModelError) -> MetricsError + '_ {
    move |source| MetricsError::Model {
        id: id.to_string(),
        source,
    }
}

fn evaluate_example<C: Classifier>(
    model: &C,
    ex: &Example,
    policy: &RankingPolicy,
) -> Result<ExampleDetail, MetricsError> {
    let (predicted, alpha) = model
        .attribution(&ex.tokens, ex.aspect_span)
        .map_err(model_err(&ex.id))?;
    let ranking = rank_tokens(&alpha, ex.aspect_span, policy);
    let gold = ex.gold_opinions();
    let best = if gold.is_empty() {
        None
    } else {
        best_gold_rank(&ranking, gold)
    };

    let context = rank_tokens(
        &alpha,
        ex.aspect_span,
        &RankingPolicy {
            exclude_aspect_tokens: true,
            ..*policy
        },
    );
    let deletion_predictions = if context.len() > policy.k {
        let mut preds = Vec::with_capacity(policy.k);
        for m in 1..=policy.k {
            let (tokens, span) = delete_tokens(&ex.tokens, ex.aspect_span, &context[..m]);
            preds.push(model.predict(&tokens, span).map_err(model_err(&ex.id))?);
        }
        Some(preds)
    } else {
        None
    };
    let top = &context[..policy.k.min(context.len())];
    let (tokens, span) = keep_tokens(&ex.tokens, ex.aspect_span, top);
    let post_hoc_prediction = model.predict(&tokens, span).map_err(model_err(&ex.id))?;

    Ok(ExampleDetail {
        id: ex.id.clone(),
        gold: ex.polarity,
        predicted,
        ranking,
        best_gold_rank: best,
        hit: best.map(|r| r <= policy.k),
        deletion_predictions,
        post_hoc_prediction,
    })
}

/// AOPC with its accuracy curve and eligibility counts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AopcResult {
    pub value: f64,
    /// Accuracy on the full input followed by accuracy after deleting the
    /// top 1..=k tokens, over eligible examples.
    pub curve: Vec<f64>,
    pub eligible: usize,
    pub skipped: usize,
}

fn aopc_from_details(details: &[ExampleDetail], k: usize) -> AopcResult {
    let eligible: Vec<&ExampleDetail> = details
        .iter()
        .filter(|d| d.deletion_predictions.is_some())
        .collect();
    let n = eligible.len();
    let skipped = details.len() - n;
    if n == 0 {
        return AopcResult {
            value: 0.0,
            curve: vec![],
            eligible: 0,
            skipped,
        };
    }
    let mut correct = vec![0usize; k + 1];
    for d in &eligible {
        correct[0] += usize::from(d.predicted == d.gold);
        for (m, p) in d.deletion_predictions.as_ref().unwrap().iter().enumerate() {
            correct[m + 1] += usize::from(*p == d.gold);
        }
    }
    let curve: Vec<f64> = correct.iter().map(|&c| c as f64 / n as f64).collect();
    let value = curve[1..].iter().map(|&a| curve[0] - a).sum::<f64>() / k as f64;
    AopcResult {
        value,
        curve,
        eligible: n,
        skipped,
    }
}

fn post_hoc_from_details(details: &[ExampleDetail]) -> f64 {
    let correct = details
        .iter()
        .filter(|d| d.post_hoc_prediction == d.gold)
        .count();
    correct as f64 / details.len() as f64
}

fn details<C: Classifier>(
    model: &C,
    examples: &[Example],
    policy: &RankingPolicy,
) -> Result<Vec<ExampleDetail>, MetricsError> {
    policy.validate()?;
    if examples.is_empty() {
        return Err(MetricsError::Empty);
    }
    examples
        .iter()
        .map(|e| evaluate_example(model, e, policy))
        .collect()
}

/// Accuracy drop as the top-ranked 1..=k non-aspect tokens are removed.
/// Examples with at most `k` non-aspect tokens are skipped.
pub fn aopc<C: Classifier>(
    model: &C,
    examples: &[Example],
    policy: &RankingPolicy,
) -> Result<AopcResult, MetricsError> {
    Ok(aopc_from_details(&details(model, examples, policy)?, policy.k))
}

/// Accuracy when only the top-k non-aspect tokens and the aspect are kept.
pub fn post_hoc_accuracy<C: Classifier>(
    model: &C,
    examples: &[Example],
    policy: &RankingPolicy,
) -> Result<f64, MetricsError> {
    Ok(post_hoc_from_details(&details(model, examples, policy)?))
}

/// Validation accuracy and HR@k (NaN when no example is scorable).
pub fn quick_validation<C: Classifier>(
    model: &C,
    examples: &[Example],
    policy: &RankingPolicy,
) -> Result<(f64, f64), MetricsError> {
    policy.validate()?;
    if examples.is_empty() {
        return Err(MetricsError::Empty);
    }
    let (mut correct, mut hits, mut scored) = (0usize, 0usize, 0usize);
    for ex in examples {
        let (pred, alpha) = model
            .attribution(&ex.tokens, ex.aspect_span)
            .map_err(model_err(&ex.id))?;
        correct += usize::from(pred == ex.polarity);
        let gold = ex.gold_opinions();
        if let Some(r) = best_gold_rank(&rank_tokens(&alpha, ex.aspect_span, policy), gold) {
            scored += 1;
            hits += usize::from(r <= policy.k);
        }
    }
    let hr = if scored > 0 {
        hits as f64 / scored as f64
    } else {
        f64::NAN
    };
    Ok((correct as f64 / examples.len() as f64, hr))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub accuracy: f64,
    pub macro_f1: f64,
    /// `None` when no example carries a gold opinion token.
    pub mrr: Option<f64>,
    pub hit_rate: Option<f64>,
    pub aopc: f64,
    pub post_hoc_accuracy: f64,
    pub n_examples: usize,
    pub policy: RankingPolicy,
    pub aopc_variant: String,
    pub aopc_curve: Vec<f64>,
    pub ranking_scored: usize,
    pub ranking_skipped: usize,
    pub aopc_eligible: usize,
    pub aopc_skipped: usize,
}

impl EvalReport {
    pub fn to_table(&self) -> String {
        let opt = |v: Option<f64>| v.map_or_else(|| "n/a".to_string(), |v| format!("{v:.4}"));
        let k = self.policy.k;
        let rows = [
            ("accuracy".to_string(), format!("{:.4}", self.accuracy)),
            ("macro_f1".to_string(), format!("{:.4}", self.macro_f1)),
            ("mrr".to_string(), opt(self.mrr)),
            (format!("hr@{k}"), opt(self.hit_rate)),
            (format!("aopc@{k}"), format!("{:.4}", self.aopc)),
            (format!("ph_acc@{k}"), format!("{:.4}", self.post_hoc_accuracy)),
            ("examples".to_string(), self.n_examples.to_string()),
            (
                "ranked (skipped)".to_string(),
                format!("{} ({})", self.ranking_scored, self.ranking_skipped),
            ),
            (
                "aopc eligible (skipped)".to_string(),
                format!("{} ({})", self.aopc_eligible, self.aopc_skipped),
            ),
            ("aopc variant".to_string(), self.aopc_variant.clone()),
        ];
        let width = rows.iter().map(|(n, _)| n.len()).max().unwrap_or(0);
        let mut out = String::new();
        for (name, value) in rows {
            let _ = writeln!(out, "{name:<width$}  {value}");
        }
        out
    }
}

/// Full metric suite with per-example details.
pub fn evaluate<C: Classifier>(
    model: &C,
    examples: &[Example],
    policy: &RankingPolicy,
) -> Result<(EvalReport, Vec<ExampleDetail>), MetricsError> {
    let details = details(model, examples, policy)?;
    let predictions: Vec<Polarity> = details.iter().map(|d| d.predicted).collect();
    let golds: Vec<Polarity> = details.iter().map(|d| d.gold).collect();
    let (accuracy, macro_f1) = accuracy_and_macro_f1(&predictions, &golds)?;
    let ranks: Vec<usize> = details.iter().filter_map(|d| d.best_gold_rank).collect();
    let scored = ranks.len();
    let (mrr, hit_rate) = if scored == 0 {
        (None, None)
    } else {
        let n = scored as f64;
        (
            Some(ranks.iter().map(|&r| 1.0 / r as f64).sum::<f64>() / n),
            Some(ranks.iter().filter(|&&r| r <= policy.k).count() as f64 / n),
        )
    };
    let aopc = aopc_from_details(&details, policy.k);
    let report = EvalReport {
        accuracy,
        macro_f1,
        mrr,
        hit_rate,
        aopc: aopc.value,
        post_hoc_accuracy: post_hoc_from_details(&details),
        n_examples: details.len(),
        policy: *policy,
        aopc_variant: AOPC_VARIANT.to_string(),
        aopc_curve: aopc.curve,
        ranking_scored: scored,
        ranking_skipped: details.len() - scored,
        aopc_eligible: aopc.eligible,
        aopc_skipped: aopc.skipped,
    };
    Ok((report, details))
}

#[cfg(test)]
mod tests {
    use super::*;
    use Polarity::*;

    #[test]
    fn accuracy_and_f1_examples() {
        let golds = [Positive, Negative, Neutral];
        assert_eq!(accuracy_and_macro_f1(&golds, &golds).unwrap(), (1.0, 1.0));
        let golds = [Positive, Positive, Negative, Negative, Neutral, Neutral];
        let (acc, f1) = accuracy_and_macro_f1(&[Positive; 6], &golds).unwrap();
        assert!((acc - 1.0 / 3.0).abs() < 1e-15);
        assert!((f1 - 0.5 / 3.0).abs() < 1e-15);
        assert!(matches!(accuracy_and_macro_f1(&[], &[]), Err(MetricsError::Empty)));
        assert!(accuracy_and_macro_f1(&[Positive], &[]).is_err());
    }

    #[test]
    fn ranking_examples() {
        let p = RankingPolicy {
            exclude_aspect_tokens: false,
            k: 5,
        };
        assert_eq!(rank_tokens(&[0.1, 0.7, 0.2], [0, 0], &p), vec![1, 2, 0]);
        assert_eq!(rank_tokens(&[0.25; 4], [0, 0], &p), vec![0, 1, 2, 3]);
        let p = RankingPolicy::default();
        assert_eq!(rank_tokens(&[0.1, 0.7, 0.2], [1, 2], &p), vec![2, 0]);
    }

    #[test]
    fn mrr_and_hr_examples() {
        assert_eq!(mrr(&[vec![2, 0, 1]], &[vec![2]]).unwrap(), 1.0);
        assert!((mrr(&[vec![0, 1, 2]], &[vec![2]]).unwrap() - 1.0 / 3.0).abs() < 1e-15);
        let r = [vec![0, 1, 2, 3], vec![0, 1, 2, 3]];
        assert_eq!(mrr(&r, &[vec![0], vec![3]]).unwrap(), 0.625);
        let r = [vec![0, 1], vec![1, 0], vec![0, 1], vec![1, 0]];
        let g = [vec![0], vec![1], vec![0], vec![0]];
        assert_eq!(hit_rate(&r, &g, 1).unwrap(), 0.75);
        assert_eq!(hit_rate(&r, &g, 2).unwrap(), 1.0);
        assert_eq!(hit_rate(&[vec![0, 1]], &[vec![1]], 1).unwrap(), 0.0);
        assert!(matches!(mrr(&[vec![0]], &[vec![5]]), Err(MetricsError::NoScorable)));
    }

    #[test]
    fn deletion_remaps_span() {
        let toks: Vec<String> = "a b asp c d".split(' ').map(String::from).collect();
        let (t, s) = delete_tokens(&toks, [2, 3], &[0, 4]);
        assert_eq!(t, vec!["b", "asp", "c"]);
        assert_eq!(s, [1, 2]);
        let (t, s) = keep_tokens(&toks, [2, 3], &[3]);
        assert_eq!(t, vec!["asp", "c"]);
        assert_eq!(s, [0, 1]);
    }

    /// Predicts `hit` when `key` is present and `miss` otherwise; attribution
    /// is concentrated on `key`.
    struct KeyModel {
        key: &'static str,
        hit: Polarity,
        miss: Polarity,
    }

    impl Classifier for KeyModel {
        fn predict(&self, tokens: &[String], _: [usize; 2]) -> Result<Polarity, ModelError> {
            Ok(if tokens.iter().any(|t| t == self.key) { self.hit } else { self.miss })
        }

        fn attribution(
            &self,
            tokens: &[String],
            span: [usize; 2],
        ) -> Result<(Polarity, Vec<f64>), ModelError> {
            let mut alpha: Vec<f64> = tokens.iter().map(|t| if t == self.key { 10.0 } else { 1.0 }).collect();
            let total: f64 = alpha.iter().sum();
            alpha.iter_mut().for_each(|a| *a /= total);
            Ok((self.predict(tokens, span)?, alpha))
        }
    }

    fn ex(id: &str, text: &str, span: [usize; 2], polarity: Polarity) -> Example {
        Example {
            id: id.into(),
            tokens: text.split(' ').map(String::from).collect(),
            aspect_span: span,
            polarity,
            opinion_indices: None,
            annotated: false,
        }
    }

    fn set() -> Vec<Example> {
        vec![
            ex("a", "the food was great and cheap too", [1, 2], Positive),
            ex("b", "service great but slow and rude staff", [0, 1], Negative),
            ex("c", "we liked the great pasta a lot here", [4, 5], Positive),
            ex("d", "tiny", [0, 1], Positive),
        ]
    }

    #[test]
    fn constant_model_has_zero_aopc() {
        let m = KeyModel { key: "great", hit: Positive, miss: Positive };
        let r = aopc(&m, &set(), &RankingPolicy::default()).unwrap();
        assert_eq!(r.value, 0.0);
        assert_eq!((r.eligible, r.skipped), (3, 1));
    }

    #[test]
    fn collapse_at_k1_equals_full_accuracy() {
        let m = KeyModel { key: "great", hit: Positive, miss: Neutral };
        let policy = RankingPolicy { exclude_aspect_tokens: true, k: 1 };
        let r = aopc(&m, &set(), &policy).unwrap();
        assert_eq!(r.curve[1], 0.0);
        assert_eq!(r.value, r.curve[0]);
        assert_eq!(r.curve[0], 2.0 / 3.0);
    }

    #[test]
    fn post_hoc_with_wide_window_is_accuracy() {
        let m = KeyModel { key: "great", hit: Positive, miss: Neutral };
        let policy = RankingPolicy { exclude_aspect_tokens: true, k: 50 };
        let (report, _) = evaluate(&m, &set(), &policy).unwrap();
        assert_eq!(report.post_hoc_accuracy, report.accuracy);
        assert_eq!(report.accuracy, 0.5);
    }

    #[test]
    fn f1_matches_confusion_oracle() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(10);
        let draw = |rng: &mut rand_chacha::ChaCha8Rng| Polarity::from_index(rng.gen_range(0..3)).unwrap();
        let preds: Vec<Polarity> = (0..10).map(|_| draw(&mut rng)).collect();
        let golds: Vec<Polarity> = (0..10).map(|_| draw(&mut rng)).collect();
        let mut confusion = [[0usize; 3]; 3];
        for (p, g) in preds.iter().zip(&golds) {
            confusion[g.index()][p.index()] += 1;
        }
        let mut f1 = 0.0;
        for c in 0..3 {
            let tp = confusion[c][c] as f64;
            let predicted: usize = (0..3).map(|g| confusion[g][c]).sum();
            let actual: usize = confusion[c].iter().sum();
            let prec = if predicted == 0 { 0.0 } else { tp / predicted as f64 };
            let rec = if actual == 0 { 0.0 } else { tp / actual as f64 };
            f1 += if prec + rec == 0.0 { 0.0 } else { 2.0 * prec * rec / (prec + rec) };
        }
        f1 /= 3.0;
        let acc = (0..3).map(|c| confusion[c][c]).sum::<usize>() as f64 / 10.0;
        let (a, f) = accuracy_and_macro_f1(&preds, &golds).unwrap();
        assert_eq!(a, acc);
        assert!((f - f1).abs() < 1e-15, "{f} vs {f1}");
    }

    #[test]
    fn invalid_policy() {
        let p = RankingPolicy {
            exclude_aspect_tokens: true,
            k: 0,
        };
        assert!(p.validate().is_err());
    }
}
