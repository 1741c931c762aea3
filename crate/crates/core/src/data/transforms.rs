use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::synthetic::{push_clause, Builder};
use super::{DataError, Example, Lexicon, Polarity, WordRole};

/// Appends a clause with a fresh non-target aspect whose opinion word has
/// the opposite polarity of the target. A neutral target gets a randomly
/// polarized clause.
///
/// The target span, polarity and opinion indices are untouched; the
/// sentence only grows at the end.
pub fn add_diff(
    example: &Example,
    lexicon: &Lexicon,
    rng: &mut ChaCha8Rng,
) -> Result<Example, DataError> {
    let polarity = example.polarity.opposite().unwrap_or_else(|| {
        if rng.gen_bool(0.5) {
            Polarity::Positive
        } else {
            Polarity::Negative
        }
    });
    let present: Vec<usize> = example
        .tokens
        .iter()
        .filter_map(|t| match lexicon.role(t) {
            WordRole::AspectNoun { group } | WordRole::Opinion { group, .. } => Some(group),
            WordRole::Other => None,
        })
        .collect();
    let fresh: Vec<usize> = (0..lexicon.groups.len())
        .filter(|g| !present.contains(g))
        .filter(|&g| !lexicon.groups[g].opinions(polarity).is_empty())
        .collect();
    let fallback: Vec<usize> = (0..lexicon.groups.len())
        .filter(|&g| !lexicon.groups[g].opinions(polarity).is_empty())
        .collect();
    let group = fresh
        .choose(rng)
        .or_else(|| fallback.choose(rng))
        .copied()
        .ok_or_else(|| DataError::Transform(format!("no {polarity} opinion words available")))?;
    let g = &lexicon.groups[group];
    let noun = g.nouns.choose(rng).unwrap().clone();
    let opinion = g.opinions(polarity).choose(rng).unwrap().clone();

    let mut b = Builder {
        tokens: example.tokens.clone(),
    };
    b.push_text(["but", ", but", ", however ,"].choose(rng).unwrap());
    push_clause(&mut b, rng, lexicon, &noun, &opinion, 0.0);
    Ok(Example {
        id: format!("{}+adddiff", example.id),
        tokens: b.tokens,
        ..example.clone()
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct RevNonOutcome {
    pub example: Example,
    /// Number of non-target opinion words swapped for antonyms.
    pub swapped: usize,
    /// Set when the transform could not apply (single-aspect sentence).
    pub flag: Option<String>,
}

/// For the example at `target` within a group sharing one sentence, swaps
/// the opinion words of every non-target aspect that shares the target's
/// polarity for an antonym. The target's label and span are unchanged.
pub fn rev_non(group: &[Example], target: usize, lexicon: &Lexicon) -> RevNonOutcome {
    let t = &group[target];
    if group.len() < 2 {
        return RevNonOutcome {
            example: t.clone(),
            swapped: 0,
            flag: Some("single-aspect sentence".into()),
        };
    }
    let mut tokens = t.tokens.clone();
    let mut swapped = 0;
    for (i, other) in group.iter().enumerate() {
        if i == target || other.polarity != t.polarity {
            continue;
        }
        for &idx in other.gold_opinions() {
            if t.gold_opinions().contains(&idx) || t.is_aspect(idx) {
                continue;
            }
            if let Some(ant) = lexicon.antonym(&t.tokens[idx]) {
                tokens[idx] = ant.to_string();
                swapped += 1;
            }
        }
    }
    let id = if swapped > 0 {
        format!("{}+revnon", t.id)
    } else {
        t.id.clone()
    };
    RevNonOutcome {
        example: Example {
            id,
            tokens,
            ..t.clone()
        },
        swapped,
        flag: None,
    }
}

/// Groups examples by identical token sequence, preserving first-seen order.
/// Returns, for each group, the indices into `split`.
pub fn group_by_sentence(split: &[Example]) -> Vec<Vec<usize>> {
    let mut order: Vec<Vec<usize>> = Vec::new();
    let mut seen: BTreeMap<&[String], usize> = BTreeMap::new();
    for (i, e) in split.iter().enumerate() {
        match seen.get(e.tokens.as_slice()) {
            Some(&g) => order[g].push(i),
            None => {
                seen.insert(&e.tokens, order.len());
                order.push(vec![i]);
            }
        }
    }
    order
}
