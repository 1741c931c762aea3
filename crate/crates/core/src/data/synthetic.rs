use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{tokenize, Corpus, DataError, Example, Lexicon, Polarity};

/// Parameters of the templated review generator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub n_train: usize,
    pub n_valid: usize,
    pub n_test: usize,
    /// Upper bound on aspects per sentence (1..=3); the count is drawn
    /// uniformly from `1..=aspects_per_sentence`.
    pub aspects_per_sentence: usize,
    /// Probability that a further aspect takes the opposite polarity of the
    /// sentence's first aspect.
    pub distractor_prob: f64,
    pub prefix_prob: f64,
    pub suffix_prob: f64,
    pub intensifier_prob: f64,
    /// Probability of a sentiment-bearing filler clause in each gap (before,
    /// between and after aspect clauses).
    pub filler_prob: f64,
    /// Probability that a filler clause agrees with the first aspect's
    /// polarity; otherwise it takes the opposite one.
    pub filler_agreement: f64,
    pub lexicon: Lexicon,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            n_train: 2000,
            n_valid: 500,
            n_test: 500,
            aspects_per_sentence: 3,
            distractor_prob: 0.9,
            prefix_prob: 0.6,
            suffix_prob: 0.4,
            intensifier_prob: 0.4,
            filler_prob: 0.9,
            filler_agreement: 0.95,
            lexicon: Lexicon::default(),
            seed: 7,
        }
    }
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<(), DataError> {
        self.lexicon.validate()?;
        if !(1..=3).contains(&self.aspects_per_sentence) {
            return Err(DataError::Lexicon(format!(
                "aspects_per_sentence must be in 1..=3, got {}",
                self.aspects_per_sentence
            )));
        }
        if self.aspects_per_sentence > self.lexicon.groups.len() {
            return Err(DataError::Lexicon(format!(
                "{} aspects per sentence need as many aspect groups, lexicon has {}",
                self.aspects_per_sentence,
                self.lexicon.groups.len()
            )));
        }
        for (name, p) in [
            ("distractor_prob", self.distractor_prob),
            ("prefix_prob", self.prefix_prob),
            ("suffix_prob", self.suffix_prob),
            ("intensifier_prob", self.intensifier_prob),
            ("filler_prob", self.filler_prob),
            ("filler_agreement", self.filler_agreement),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return Err(DataError::Lexicon(format!("{name} must be in [0, 1], got {p}")));
            }
        }
        Ok(())
    }
}

struct AspectSlot {
    span: [usize; 2],
    opinion: usize,
    polarity: Polarity,
}

pub(crate) struct Builder {
    pub(crate) tokens: Vec<String>,
}

impl Builder {
    pub(crate) fn push_text(&mut self, text: &str) {
        self.tokens.extend(tokenize(text));
    }

    /// Appends `text` and returns the half-open token span it occupies.
    fn push_span(&mut self, text: &str) -> [usize; 2] {
        let start = self.tokens.len();
        self.push_text(text);
        [start, self.tokens.len()]
    }
}

fn draw_polarity(rng: &mut ChaCha8Rng) -> Polarity {
    let u: f64 = rng.gen();
    if u < 0.45 {
        Polarity::Positive
    } else if u < 0.8 {
        Polarity::Negative
    } else {
        Polarity::Neutral
    }
}

/// Appends one aspect clause using a randomly chosen template.
pub(crate) fn push_clause(
    b: &mut Builder,
    rng: &mut ChaCha8Rng,
    lexicon: &Lexicon,
    noun: &str,
    opinion: &str,
    intensifier_prob: f64,
) -> ([usize; 2], usize) {
    let adverb = |rng: &mut ChaCha8Rng| {
        if rng.gen_bool(intensifier_prob) {
            lexicon.intensifiers.choose(rng).cloned()
        } else {
            None
        }
    };
    let template = rng.gen_range(0..4);
    let span;
    let op;
    match template {
        0 | 1 => {
            b.push_text(if template == 0 { "the" } else { "i thought the" });
            span = b.push_span(noun);
            b.push_text(if noun.ends_with('s') { "were" } else { "was" });
            if let Some(a) = adverb(rng) {
                b.push_text(&a);
            }
            op = b.push_span(opinion)[0];
        }
        2 => {
            b.push_text("we found the");
            span = b.push_span(noun);
            if let Some(a) = adverb(rng) {
                b.push_text(&a);
            }
            op = b.push_span(opinion)[0];
        }
        _ => {
            b.push_text("they have");
            if let Some(a) = adverb(rng) {
                b.push_text(&a);
            }
            op = b.push_span(opinion)[0];
            span = b.push_span(noun);
        }
    }
    (span, op)
}

/// Sentiment-bearing filler clause, or `None` with probability
/// `1 - filler_prob`. Neutral sentences get a random overall tone.
fn draw_filler(spec: &SyntheticSpec, first: Polarity, rng: &mut ChaCha8Rng) -> Option<String> {
    if !rng.gen_bool(spec.filler_prob) {
        return None;
    }
    let tone = match first.opposite() {
        Some(opposite) if !rng.gen_bool(spec.filler_agreement) => opposite,
        Some(_) => first,
        None if rng.gen_bool(0.5) => Polarity::Positive,
        None => Polarity::Negative,
    };
    spec.lexicon.fillers(tone).choose(rng).cloned()
}

fn generate_sentence(
    spec: &SyntheticSpec,
    rng: &mut ChaCha8Rng,
    n_aspects: usize,
) -> (Vec<String>, Vec<AspectSlot>) {
    let lex = &spec.lexicon;
    let mut groups: Vec<usize> = (0..lex.groups.len()).collect();
    groups.shuffle(rng);
    groups.truncate(n_aspects);

    let first = draw_polarity(rng);
    let polarities: Vec<Polarity> = (0..n_aspects)
        .map(|i| {
            if i == 0 {
                first
            } else if rng.gen_bool(spec.distractor_prob) {
                first.opposite().unwrap_or_else(|| {
                    if rng.gen_bool(0.5) {
                        Polarity::Positive
                    } else {
                        Polarity::Negative
                    }
                })
            } else {
                first
            }
        })
        .collect();

    let mut b = Builder { tokens: Vec::new() };
    if rng.gen_bool(spec.prefix_prob) {
        if let Some(p) = lex.prefixes.choose(rng) {
            b.push_text(p);
        }
    }
    let mut slots = Vec::with_capacity(n_aspects);
    for (i, (&g, &pol)) in groups.iter().zip(&polarities).enumerate() {
        if let Some(f) = draw_filler(spec, first, rng) {
            b.push_text(&f);
            b.push_text(",");
        }
        if i > 0 {
            let contrast = pol != polarities[i - 1];
            let joiners: &[&str] = if contrast {
                &["but", ", however ,", "although", ", while"]
            } else {
                &["and", ", and", ", also", "and also"]
            };
            b.push_text(joiners.choose(rng).unwrap());
        }
        let group = &lex.groups[g];
        let noun = group.nouns.choose(rng).unwrap().clone();
        let opinion = group.opinions(pol).choose(rng).unwrap().clone();
        let (span, op) = push_clause(&mut b, rng, lex, &noun, &opinion, spec.intensifier_prob);
        slots.push(AspectSlot {
            span,
            opinion: op,
            polarity: pol,
        });
    }
    if let Some(f) = draw_filler(spec, first, rng) {
        b.push_text(",");
        b.push_text(&f);
    }
    if rng.gen_bool(spec.suffix_prob) {
        if let Some(s) = lex.suffixes.choose(rng) {
            b.push_text(s);
        }
    }
    (b.tokens, slots)
}

fn generate_split(
    spec: &SyntheticSpec,
    rng: &mut ChaCha8Rng,
    name: &str,
    n: usize,
) -> Vec<Example> {
    let mut out = Vec::with_capacity(n);
    let mut sentence = 0;
    while out.len() < n {
        let remaining = n - out.len();
        let k = rng.gen_range(1..=spec.aspects_per_sentence).min(remaining);
        let (tokens, slots) = generate_sentence(spec, rng, k);
        for (a, slot) in slots.into_iter().enumerate() {
            out.push(Example {
                id: format!("{name}-{sentence:05}-{a}"),
                tokens: tokens.clone(),
                aspect_span: slot.span,
                polarity: slot.polarity,
                opinion_indices: Some(vec![slot.opinion]),
                annotated: true,
            });
        }
        sentence += 1;
    }
    out
}

/// Generates train/valid/test splits of templated multi-aspect reviews.
///
/// Each sentence yields one example per aspect; the opinion mask marks the
/// opinion word attached to that aspect, and polarity is that word's
/// lexicon polarity. Every example starts annotated; use
/// [`super::subsample_annotations`] to hide masks.
pub fn generate_synthetic(spec: &SyntheticSpec, seed: u64) -> Result<Corpus, DataError> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut splits = BTreeMap::new();
    for (name, n) in [
        ("train", spec.n_train),
        ("valid", spec.n_valid),
        ("test", spec.n_test),
    ] {
        let split = generate_split(spec, &mut rng, name, n);
        for e in &split {
            e.validate()?;
        }
        splits.insert(name.to_string(), split);
    }
    Ok(Corpus::new(splits))
}
