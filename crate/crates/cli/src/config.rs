use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use iega_core::attribution::GradientFlow;
use iega_core::data::{Lexicon, SyntheticSpec};
use iega_core::metrics::RankingPolicy;
use iega_core::model::ModelConfig;
use iega_core::training::TrainConfig;

use crate::{Exit, EXIT_CONFIG, EXIT_IO};

/// Environment variable naming the directory runs go under by default.
pub const RUN_ROOT_ENV: &str = "IEGA_RUN_ROOT";

/// Every knob of every command, as one flat JSON object.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub data_dir: PathBuf,
    /// Explicit run directory; derived from the run root when absent.
    pub run_dir: Option<PathBuf>,

    pub embed_dim: usize,
    pub hidden_dim: usize,
    pub max_len: usize,
    /// Defaults to `seed`.
    pub init_seed: Option<u64>,

    pub lambda: f64,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
    pub correction_mode: GradientFlow,
    pub annotated_fraction: f64,

    pub exclude_aspect_tokens: bool,
    pub k: usize,

    pub n_train: usize,
    pub n_valid: usize,
    pub n_test: usize,
    pub aspects_per_sentence: usize,
    pub distractor_prob: f64,
    pub prefix_prob: f64,
    pub suffix_prob: f64,
    pub intensifier_prob: f64,
    pub filler_prob: f64,
    pub filler_agreement: f64,
    pub data_seed: u64,
    /// JSON lexicon replacing the built-in one.
    pub lexicon_path: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        let m = ModelConfig::new(1);
        let t = TrainConfig::default();
        let r = RankingPolicy::default();
        let s = SyntheticSpec::default();
        Self {
            data_dir: PathBuf::from("data"),
            run_dir: None,
            embed_dim: m.embed_dim,
            hidden_dim: m.hidden_dim,
            max_len: m.max_len,
            init_seed: None,
            lambda: t.lambda,
            learning_rate: t.learning_rate,
            batch_size: t.batch_size,
            epochs: t.epochs,
            seed: t.seed,
            correction_mode: t.correction_mode,
            annotated_fraction: t.annotated_fraction,
            exclude_aspect_tokens: r.exclude_aspect_tokens,
            k: r.k,
            n_train: s.n_train,
            n_valid: s.n_valid,
            n_test: s.n_test,
            aspects_per_sentence: s.aspects_per_sentence,
            distractor_prob: s.distractor_prob,
            prefix_prob: s.prefix_prob,
            suffix_prob: s.suffix_prob,
            intensifier_prob: s.intensifier_prob,
            filler_prob: s.filler_prob,
            filler_agreement: s.filler_agreement,
            data_seed: s.seed,
            lexicon_path: None,
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))
            .context(Exit(EXIT_IO))?;
        serde_json::from_str(&text)
            .with_context(|| format!("parsing config {}", path.display()))
            .context(Exit(EXIT_CONFIG))
    }

    /// Applies `key=value` overrides. Values parse as JSON, falling back to
    /// a plain string.
    pub fn with_overrides(self, overrides: &[String]) -> Result<Self> {
        if overrides.is_empty() {
            return Ok(self);
        }
        let mut value = serde_json::to_value(&self)?;
        let map = value.as_object_mut().expect("config serializes to an object");
        for item in overrides {
            let Some((key, raw)) = item.split_once('=') else {
                return Err(anyhow::anyhow!("override `{item}` is not key=value"))
                    .context(Exit(EXIT_CONFIG));
            };
            let key = key.trim().replace('-', "_");
            if !map.contains_key(&key) {
                return Err(anyhow::anyhow!("unknown config key `{key}`")).context(Exit(EXIT_CONFIG));
            }
            let parsed = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
            map.insert(key, parsed);
        }
        serde_json::from_value(value)
            .context("applying overrides")
            .context(Exit(EXIT_CONFIG))
    }

    pub fn validate(&self) -> Result<()> {
        let check = || -> Result<()> {
            self.train_config().validate()?;
            self.model_config(1).validate()?;
            self.ranking_policy().validate()?;
            Ok(())
        };
        check().context(Exit(EXIT_CONFIG))
    }

    pub fn model_config(&self, vocab_size: usize) -> ModelConfig {
        ModelConfig {
            vocab_size,
            embed_dim: self.embed_dim,
            hidden_dim: self.hidden_dim,
            max_len: self.max_len,
            init_seed: self.init_seed.unwrap_or(self.seed),
            ..ModelConfig::new(vocab_size)
        }
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            lambda: self.lambda,
            learning_rate: self.learning_rate,
            batch_size: self.batch_size,
            epochs: self.epochs,
            seed: self.seed,
            correction_mode: self.correction_mode,
            annotated_fraction: self.annotated_fraction,
        }
    }

    pub fn ranking_policy(&self) -> RankingPolicy {
        RankingPolicy {
            exclude_aspect_tokens: self.exclude_aspect_tokens,
            k: self.k,
        }
    }

    pub fn synthetic_spec(&self) -> Result<SyntheticSpec> {
        let lexicon = match &self.lexicon_path {
            None => Lexicon::default(),
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .with_context(|| format!("reading lexicon {}", p.display()))
                    .context(Exit(EXIT_IO))?;
                serde_json::from_str(&text)
                    .with_context(|| format!("parsing lexicon {}", p.display()))
                    .context(Exit(EXIT_CONFIG))?
            }
        };
        let spec = SyntheticSpec {
            n_train: self.n_train,
            n_valid: self.n_valid,
            n_test: self.n_test,
            aspects_per_sentence: self.aspects_per_sentence,
            distractor_prob: self.distractor_prob,
            prefix_prob: self.prefix_prob,
            suffix_prob: self.suffix_prob,
            intensifier_prob: self.intensifier_prob,
            filler_prob: self.filler_prob,
            filler_agreement: self.filler_agreement,
            lexicon,
            seed: self.data_seed,
        };
        spec.validate().context(Exit(EXIT_CONFIG))?;
        Ok(spec)
    }

    /// Run directory: explicit, or `<run root>/<name>` where the root comes
    /// from the environment or defaults to `runs`.
    pub fn resolve_run_dir(&self) -> PathBuf {
        if let Some(dir) = &self.run_dir {
            return dir.clone();
        }
        let root = std::env::var_os(RUN_ROOT_ENV)
            .map(PathBuf::from)
            .unwrap_or_else(|| PathBuf::from("runs"));
        root.join(format!(
            "lambda{}-p{}-seed{}",
            self.lambda, self.annotated_fraction, self.seed
        ))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip_and_override() {
        let c = RunConfig::default();
        assert_eq!(c.lambda, 0.01);
        assert_eq!(c.k, 5);
        let text = serde_json::to_string(&c).unwrap();
        let back: RunConfig = serde_json::from_str(&text).unwrap();
        assert_eq!(back, c);
        let o = c
            .with_overrides(&["lambda=0".into(), "data-dir=/tmp/x".into(), "correction_mode=detached".into()])
            .unwrap();
        assert_eq!(o.lambda, 0.0);
        assert_eq!(o.data_dir, PathBuf::from("/tmp/x"));
        assert_eq!(o.correction_mode, GradientFlow::Detached);
    }

    #[test]
    fn bad_overrides_are_config_errors() {
        for bad in ["nope=1", "lambda", "epochs=-1"] {
            let err = RunConfig::default().with_overrides(&[bad.into()]).unwrap_err();
            assert_eq!(crate::exit_code(&err), EXIT_CONFIG, "{bad}");
        }
    }

    #[test]
    fn partial_file_fills_defaults() {
        let c: RunConfig = serde_json::from_str(r#"{"lambda": 0.5}"#).unwrap();
        assert_eq!(c.lambda, 0.5);
        assert_eq!(c.epochs, 20);
        assert!(serde_json::from_str::<RunConfig>(r#"{"lamda": 0.5}"#).is_err());
    }
}
