use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::Example;

/// Keeps opinion annotations visible on a seeded random `ceil(p * n)` subset
/// of the `n` annotated examples; the rest keep their opinion indices but
/// are marked unannotated. Already-unannotated examples stay that way.
///
/// For a fixed seed the selected sets are nested in `p`: the subset drawn
/// for 0.1 is contained in the one drawn for 0.2.
pub fn subsample_annotations(split: &[Example], fraction: f64, seed: u64) -> Vec<Example> {
    let fraction = fraction.clamp(0.0, 1.0);
    let mut eligible: Vec<usize> = split
        .iter()
        .enumerate()
        .filter(|(_, e)| e.annotated && !e.gold_opinions().is_empty())
        .map(|(i, _)| i)
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    eligible.shuffle(&mut rng);
    let keep = ((fraction * eligible.len() as f64) - 1e-9).ceil().max(0.0) as usize;
    let mut chosen = vec![false; split.len()];
    for &i in eligible.iter().take(keep) {
        chosen[i] = true;
    }
    split
        .iter()
        .zip(chosen)
        .map(|(e, keep)| Example {
            annotated: keep,
            ..e.clone()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Polarity;

    fn split(n: usize) -> Vec<Example> {
        (0..n)
            .map(|i| Example {
                id: format!("e{i}"),
                tokens: vec!["the".into(), "food".into(), "was".into(), "good".into()],
                aspect_span: [1, 2],
                polarity: Polarity::Positive,
                opinion_indices: Some(vec![3]),
                annotated: true,
            })
            .collect()
    }

    fn annotated_ids(s: &[Example]) -> Vec<String> {
        s.iter().filter(|e| e.annotated).map(|e| e.id.clone()).collect()
    }

    #[test]
    fn extremes() {
        assert!(subsample_annotations(&split(7), 1.0, 3).iter().all(|e| e.annotated));
        assert!(subsample_annotations(&split(7), 0.0, 3).iter().all(|e| !e.annotated));
    }

    #[test]
    fn hidden_masks_stay_hidden() {
        let mut s = split(4);
        s[0].annotated = false;
        let out = subsample_annotations(&s, 1.0, 0);
        assert!(!out[0].annotated);
        assert!(out[1..].iter().all(|e| e.annotated));
    }

    #[test]
    fn half_of_ten_is_five_and_deterministic() {
        let a = subsample_annotations(&split(10), 0.5, 11);
        let b = subsample_annotations(&split(10), 0.5, 11);
        assert_eq!(annotated_ids(&a).len(), 5);
        assert_eq!(annotated_ids(&a), annotated_ids(&b));
        assert!(a.iter().all(|e| e.gold_opinions() == [3]));
    }

    #[test]
    fn nested_in_fraction() {
        let s = split(150);
        let mut prev: Vec<String> = Vec::new();
        for p in [0.1, 0.2, 0.5, 1.0] {
            let cur = annotated_ids(&subsample_annotations(&s, p, 5));
            assert!(prev.iter().all(|id| cur.contains(id)));
            prev = cur;
        }
    }
}
