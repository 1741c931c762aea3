use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use super::{tokenize, DataError, Polarity};

/// Aspect nouns with the opinion words that typically describe them.
///
/// `positive[i]` and `negative[i]` are treated as antonyms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AspectGroup {
    pub name: String,
    /// Aspect terms; may be multi-word ("battery life").
    pub nouns: Vec<String>,
    pub positive: Vec<String>,
    pub negative: Vec<String>,
    pub neutral: Vec<String>,
}

impl AspectGroup {
    pub fn opinions(&self, polarity: Polarity) -> &[String] {
        match polarity {
            Polarity::Positive => &self.positive,
            Polarity::Negative => &self.negative,
            Polarity::Neutral => &self.neutral,
        }
    }
}

/// What a token means to the generator and the transforms.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WordRole {
    Opinion { group: usize, polarity: Polarity },
    AspectNoun { group: usize },
    Other,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Lexicon {
    pub groups: Vec<AspectGroup>,
    /// Clauses that may open a sentence.
    pub prefixes: Vec<String>,
    /// Clauses that may close a sentence.
    pub suffixes: Vec<String>,
    /// Adverbs placed before opinion words.
    pub intensifiers: Vec<String>,
    /// Clauses carrying overall sentiment that no aspect owns.
    #[serde(default)]
    pub positive_fillers: Vec<String>,
    #[serde(default)]
    pub negative_fillers: Vec<String>,
}

fn words(list: &[&str]) -> Vec<String> {
    list.iter().map(|s| s.to_string()).collect()
}

fn group(name: &str, nouns: &[&str], pos: &[&str], neg: &[&str], neu: &[&str]) -> AspectGroup {
    AspectGroup {
        name: name.to_string(),
        nouns: words(nouns),
        positive: words(pos),
        negative: words(neg),
        neutral: words(neu),
    }
}

impl Default for Lexicon {
    fn default() -> Self {
        Self {
            groups: vec![
                group(
                    "food",
                    &["food", "pasta", "pizza", "sushi", "dessert"],
                    &["delicious", "tasty", "flavorful", "fresh"],
                    &["bland", "tasteless", "greasy", "stale"],
                    &["ordinary", "plain"],
                ),
                group(
                    "service",
                    &["service", "staff", "waiter", "waitress", "customer service"],
                    &["friendly", "attentive", "polite", "helpful"],
                    &["rude", "inattentive", "arrogant", "unhelpful"],
                    &["routine", "formal"],
                ),
                group(
                    "price",
                    &["price", "prices", "bill", "wine list"],
                    &["reasonable", "cheap", "fair", "affordable"],
                    &["outrageous", "expensive", "unfair", "overpriced"],
                    &["typical", "standard"],
                ),
                group(
                    "ambience",
                    &["decor", "music", "atmosphere", "seating"],
                    &["cozy", "charming", "lovely", "relaxing"],
                    &["cramped", "dreary", "ugly", "stressful"],
                    &["quiet", "modern"],
                ),
                group(
                    "screen",
                    &["screen", "display", "resolution"],
                    &["bright", "crisp", "sharp", "vivid"],
                    &["dim", "blurry", "grainy", "washed"],
                    &["glossy", "matte"],
                ),
                group(
                    "battery",
                    &["battery", "battery life", "charger"],
                    &["durable", "reliable", "longlasting", "efficient"],
                    &["weak", "unreliable", "shortlived", "inefficient"],
                    &["removable", "replaceable"],
                ),
                group(
                    "performance",
                    &["performance", "processor", "speed", "keyboard"],
                    &["fast", "smooth", "responsive", "powerful"],
                    &["slow", "laggy", "unresponsive", "sluggish"],
                    &["adequate", "average"],
                ),
            ],
            prefixes: words(&[
                "i visited this place last friday with my family ,",
                "we came here for a birthday dinner ,",
                "honestly ,",
                "after reading a few reviews online ,",
                "as a regular visitor i have to say",
                "i bought this machine two months ago and",
                "to be honest ,",
                "my sister recommended it to me ,",
            ]),
            suffixes: words(&[
                ", at least in my opinion",
                "if you ask me",
                ", which i did not expect",
                ", or so my friends told me",
                "this time around",
                ", as far as i can tell",
            ]),
            intensifiers: words(&["very", "really", "quite", "so", "rather", "truly"]),
            positive_fillers: words(&[
                "overall a wonderful experience",
                "we had a great time",
                "what an amazing evening",
                "my friends loved it",
                "highly recommended",
                "a nice surprise",
                "definitely worth it",
                "we were happy",
            ]),
            negative_fillers: words(&[
                "overall a terrible experience",
                "we had an awful time",
                "what a disappointing evening",
                "my friends hated it",
                "never again",
                "a bad surprise",
                "definitely not worth it",
                "we were upset",
            ]),
        }
    }
}

impl Lexicon {
    /// Checks non-empty lists and that opinion words, aspect tokens and
    /// frame words do not overlap.
    pub fn validate(&self) -> Result<(), DataError> {
        let err = |m: String| Err(DataError::Lexicon(m));
        if self.groups.is_empty() {
            return err("no aspect groups".into());
        }
        let mut opinion = HashSet::new();
        let mut aspect = HashSet::new();
        for g in &self.groups {
            if g.nouns.is_empty() {
                return err(format!("group {} has no aspect nouns", g.name));
            }
            for p in Polarity::ALL {
                if g.opinions(p).is_empty() {
                    return err(format!("group {} has no {} opinion words", g.name, p));
                }
                for w in g.opinions(p) {
                    if tokenize(w).len() != 1 {
                        return err(format!("opinion word `{w}` must be a single token"));
                    }
                    if !opinion.insert(w.to_lowercase()) {
                        return err(format!("opinion word `{w}` listed twice"));
                    }
                }
            }
            for n in &g.nouns {
                aspect.extend(tokenize(n));
            }
        }
        if let Some(w) = opinion.intersection(&aspect).next() {
            return err(format!("`{w}` is both an opinion word and an aspect token"));
        }
        let frame: HashSet<String> = self
            .prefixes
            .iter()
            .chain(&self.suffixes)
            .chain(&self.intensifiers)
            .chain(&self.positive_fillers)
            .chain(&self.negative_fillers)
            .flat_map(|s| tokenize(s))
            .chain(FRAME_WORDS.iter().map(|s| s.to_string()))
            .collect();
        if let Some(w) = frame.iter().find(|w| opinion.contains(*w) || aspect.contains(*w)) {
            return err(format!("frame word `{w}` overlaps the aspect/opinion lexicons"));
        }
        Ok(())
    }

    pub fn role(&self, token: &str) -> WordRole {
        for (gi, g) in self.groups.iter().enumerate() {
            for p in Polarity::ALL {
                if g.opinions(p).iter().any(|w| w == token) {
                    return WordRole::Opinion {
                        group: gi,
                        polarity: p,
                    };
                }
            }
        }
        for (gi, g) in self.groups.iter().enumerate() {
            if g.nouns.iter().any(|n| tokenize(n).iter().any(|t| t == token)) {
                return WordRole::AspectNoun { group: gi };
            }
        }
        WordRole::Other
    }

    /// Opposite-polarity counterpart of a positive or negative opinion word.
    pub fn antonym(&self, token: &str) -> Option<&str> {
        let WordRole::Opinion { group, polarity } = self.role(token) else {
            return None;
        };
        let g = &self.groups[group];
        let from = g.opinions(polarity);
        let to = g.opinions(polarity.opposite()?);
        let i = from.iter().position(|w| w == token)?;
        Some(to[i % to.len()].as_str())
    }

    /// Filler clauses of the given overall polarity (neutral has none).
    pub fn fillers(&self, polarity: Polarity) -> &[String] {
        match polarity {
            Polarity::Positive => &self.positive_fillers,
            Polarity::Negative => &self.negative_fillers,
            Polarity::Neutral => &[],
        }
    }

    /// Group whose noun list contains exactly this token sequence.
    pub fn group_of_aspect(&self, tokens: &[String]) -> Option<usize> {
        self.groups
            .iter()
            .position(|g| g.nouns.iter().any(|n| tokenize(n) == tokens))
    }
}

/// Template words used to glue clauses together.
pub(crate) const FRAME_WORDS: &[&str] = &[
    "the", "was", "is", "were", "we", "found", "i", "thought", "they", "have", "and", "but",
    "however", ",", "although", "also", "while", "honestly",
];
