use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context, Result};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use iega_core::attribution::{explain, SaliencyRecord};
use iega_core::data::{
    add_diff, generate_synthetic, group_by_sentence, import_towe, load_jsonl, rev_non,
    save_jsonl, Corpus, DataError, Example, Lexicon,
};
use iega_core::metrics::{evaluate, EvalReport, ExampleDetail, RankingPolicy, TrainedModel};
use iega_core::model::{Checkpoint, ModelError};
use iega_core::training::{train_with, EpochRecord, TrainError};

use crate::config::RunConfig;
use crate::render::{self, Explained};
use crate::{Exit, EXIT_CHECKPOINT, EXIT_DATA, EXIT_INAPPLICABLE, EXIT_IO};

pub const SPLITS: [&str; 3] = ["train", "valid", "test"];

fn data_exit(e: &DataError) -> Exit {
    match e {
        DataError::Io(_) => Exit(EXIT_IO),
        _ => Exit(EXIT_DATA),
    }
}

fn model_exit(e: &ModelError) -> Exit {
    match e {
        ModelError::Io(_) => Exit(EXIT_IO),
        ModelError::Checkpoint(_) => Exit(EXIT_CHECKPOINT),
        _ => Exit(EXIT_DATA),
    }
}

fn io<T>(r: std::io::Result<T>, what: impl FnOnce() -> String) -> Result<T> {
    r.with_context(what).context(Exit(EXIT_IO))
}

/// Writes `bytes` to `path` through a temporary file and a rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = path.with_extension("tmp");
    io(fs::write(&tmp, bytes), || format!("writing {}", tmp.display()))?;
    io(fs::rename(&tmp, path), || format!("renaming to {}", path.display()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub seed: u64,
    pub counts: std::collections::BTreeMap<String, usize>,
    pub vocabulary_size: usize,
}

pub fn gen_data(cfg: &RunConfig, out_dir: &Path) -> Result<Manifest> {
    let spec = cfg.synthetic_spec()?;
    let corpus = generate_synthetic(&spec, cfg.data_seed)
        .context("generating corpus")
        .context(Exit(crate::EXIT_CONFIG))?;
    io(fs::create_dir_all(out_dir), || format!("creating {}", out_dir.display()))?;
    for name in SPLITS {
        let path = out_dir.join(format!("{name}.jsonl"));
        save_jsonl(corpus.split(name).unwrap_or(&[]), &path)
            .map_err(|e| {
                let exit = data_exit(&e);
                anyhow!(e).context(format!("writing {}", path.display())).context(exit)
            })?;
    }
    let manifest = Manifest {
        seed: cfg.data_seed,
        counts: corpus
            .splits
            .iter()
            .map(|(k, v)| (k.clone(), v.len()))
            .collect(),
        vocabulary_size: corpus.vocabulary.len(),
    };
    write_atomic(
        &out_dir.join("manifest.json"),
        serde_json::to_string_pretty(&manifest)?.as_bytes(),
    )?;
    Ok(manifest)
}

pub fn import(input: &Path, out: &Path) -> Result<(usize, Vec<(usize, String)>)> {
    let imported = import_towe(input).map_err(|e| {
        let exit = data_exit(&e);
        anyhow!(e).context(format!("importing {}", input.display())).context(exit)
    })?;
    save_jsonl(&imported.examples, out).map_err(|e| {
        let exit = data_exit(&e);
        anyhow!(e).context(format!("writing {}", out.display())).context(exit)
    })?;
    Ok((imported.examples.len(), imported.skipped))
}

/// `name` is a split in `data_dir`, or a path to a JSONL file.
pub fn load_split(data_dir: &Path, name: &str) -> Result<Vec<Example>> {
    let path = if name.ends_with(".jsonl") || name.contains(std::path::MAIN_SEPARATOR) {
        PathBuf::from(name)
    } else {
        data_dir.join(format!("{name}.jsonl"))
    };
    load_jsonl(&path).map_err(|e| {
        let exit = data_exit(&e);
        anyhow!(e).context(format!("loading {}", path.display())).context(exit)
    })
}

/// Train split plus whichever of valid/test exist.
pub fn load_corpus(data_dir: &Path) -> Result<Corpus> {
    let mut splits = std::collections::BTreeMap::new();
    splits.insert("train".to_string(), load_split(data_dir, "train")?);
    for name in ["valid", "test"] {
        if data_dir.join(format!("{name}.jsonl")).exists() {
            splits.insert(name.to_string(), load_split(data_dir, name)?);
        }
    }
    Ok(Corpus::new(splits))
}

pub fn load_checkpoint(path: &Path) -> Result<TrainedModel> {
    let ckpt = Checkpoint::load(path).map_err(|e| {
        let exit = match e {
            ModelError::Io(_) => Exit(EXIT_IO),
            _ => Exit(EXIT_CHECKPOINT),
        };
        anyhow!(e).context(format!("loading checkpoint {}", path.display())).context(exit)
    })?;
    Ok(TrainedModel::new(ckpt.params, ckpt.vocabulary))
}

fn train_exit(e: TrainError) -> anyhow::Error {
    let exit = match &e {
        TrainError::InvalidConfig(_) => Exit(crate::EXIT_CONFIG),
        TrainError::Model(m) => model_exit(m),
        _ => Exit(EXIT_DATA),
    };
    anyhow!(e).context(exit)
}

#[derive(Debug, Clone, Serialize)]
pub struct TrainSummary {
    pub run_dir: PathBuf,
    pub best_epoch: usize,
    pub final_epoch: EpochRecord,
    pub validation: Option<EvalReport>,
}

pub const HISTORY_FILE: &str = "history.csv";

/// Trains into the resolved run directory: `config.json`, `seed.json`,
/// `history.csv`, `last.json` (rewritten every epoch), `best.json` and
/// `final.json`.
pub fn train_run(cfg: &RunConfig) -> Result<TrainSummary> {
    cfg.validate()?;
    let corpus = load_corpus(&cfg.data_dir)?;
    let run_dir = cfg.resolve_run_dir();
    io(fs::create_dir_all(&run_dir), || format!("creating {}", run_dir.display()))?;
    let snapshot = RunConfig {
        run_dir: Some(run_dir.clone()),
        ..cfg.clone()
    };
    write_atomic(
        &run_dir.join("config.json"),
        serde_json::to_string_pretty(&snapshot)?.as_bytes(),
    )?;
    let model_config = cfg.model_config(corpus.vocabulary.len());
    write_atomic(
        &run_dir.join("seed.json"),
        serde_json::to_string_pretty(&serde_json::json!({
            "seed": cfg.seed,
            "init_seed": model_config.init_seed,
            "data_seed": cfg.data_seed,
        }))?
        .as_bytes(),
    )?;

    let history_path = run_dir.join(HISTORY_FILE);
    let mut history = csv::Writer::from_writer(io(fs::File::create(&history_path), || {
        format!("creating {}", history_path.display())
    })?);
    let mut failure: Option<anyhow::Error> = None;
    let outcome = train_with(&corpus, &cfg.train_config(), &model_config, |record, params| {
        if failure.is_some() {
            return;
        }
        let mut step = || -> Result<()> {
            history.serialize(record).context(Exit(EXIT_IO))?;
            io(history.flush(), || "flushing history".into())?;
            let ckpt = Checkpoint::new(params.clone(), corpus.vocabulary.clone());
            write_atomic(&run_dir.join("last.json"), ckpt.to_json().as_bytes())
        };
        if let Err(e) = step() {
            failure = Some(e);
        }
    })
    .map_err(train_exit)?;
    if let Some(e) = failure {
        return Err(e);
    }
    for (name, params) in [("best.json", &outcome.best_params), ("final.json", &outcome.final_params)] {
        let ckpt = Checkpoint::new(params.clone(), outcome.vocabulary.clone());
        write_atomic(&run_dir.join(name), ckpt.to_json().as_bytes())?;
    }
    let validation = match corpus.split("valid") {
        Some(valid) if !valid.is_empty() => {
            let model = TrainedModel::new(outcome.best_params.clone(), outcome.vocabulary.clone());
            Some(evaluate_model(&model, valid, &cfg.ranking_policy())?.0)
        }
        _ => None,
    };
    Ok(TrainSummary {
        run_dir,
        best_epoch: outcome.best_epoch,
        final_epoch: outcome.history.last().cloned().ok_or_else(|| {
            anyhow!("training ran zero epochs").context(Exit(crate::EXIT_CONFIG))
        })?,
        validation,
    })
}

pub fn evaluate_model(
    model: &TrainedModel,
    examples: &[Example],
    policy: &RankingPolicy,
) -> Result<(EvalReport, Vec<ExampleDetail>)> {
    evaluate(model, examples, policy).map_err(|e| {
        let exit = match &e {
            iega_core::metrics::MetricsError::Model { source, .. } => model_exit(source),
            iega_core::metrics::MetricsError::InvalidPolicy(_) => Exit(crate::EXIT_CONFIG),
            _ => Exit(EXIT_DATA),
        };
        anyhow!(e).context(exit)
    })
}

pub fn write_details(details: &[ExampleDetail], path: &Path) -> Result<()> {
    let mut buf = Vec::new();
    for d in details {
        serde_json::to_writer(&mut buf, d)?;
        buf.push(b'\n');
    }
    write_atomic(path, &buf)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum ExplainFormat {
    Text,
    Html,
}

/// Explains `examples` (or the one with `id`) and renders them.
pub fn explain_examples(
    model: &TrainedModel,
    examples: &[Example],
    id: Option<&str>,
    format: ExplainFormat,
) -> Result<(String, Vec<SaliencyRecord>)> {
    let selected: Vec<&Example> = match id {
        Some(id) => {
            let e = examples
                .iter()
                .find(|e| e.id == id)
                .ok_or_else(|| anyhow!("no example with id `{id}`").context(Exit(EXIT_DATA)))?;
            vec![e]
        }
        None => examples.iter().collect(),
    };
    let mut items = Vec::with_capacity(selected.len());
    let mut records = Vec::with_capacity(selected.len());
    for e in selected {
        let ids = model.vocabulary.encode(&e.tokens);
        let map = explain(&ids, e.aspect_span, &model.params).map_err(|err| {
            let exit = model_exit(&err);
            anyhow!(err).context(format!("explaining {}", e.id)).context(exit)
        })?;
        records.push(SaliencyRecord {
            id: e.id.clone(),
            tokens: e.tokens.clone(),
            aspect_span: e.aspect_span,
            alpha: map.alpha.clone(),
            score: map.scores.clone(),
            gradient_norm: map.gradient_norms.clone(),
            predicted: map.target_class,
            gold: e.polarity,
        });
        items.push(Explained {
            example: e,
            predicted: map.target_class,
            alpha: map.alpha,
        });
    }
    let rendered = match format {
        ExplainFormat::Text => render::text(&items),
        ExplainFormat::Html => render::html(&items),
    };
    Ok((rendered, records))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Sweep {
    Fractions,
    Lambdas,
}

/// One row of the sweep CSV. For a lambda sweep the first column holds
/// lambda instead of the annotation fraction.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AblationRow {
    pub fraction: f64,
    pub seed: u64,
    pub acc: f64,
    pub f1: f64,
    pub mrr: Option<f64>,
    pub hr: Option<f64>,
    pub aopc: f64,
    pub ph_acc: f64,
}

/// Trains and evaluates one model per (seed, setting) pair on the test
/// split. Seeds are paired across settings.
pub fn ablate(cfg: &RunConfig, sweep: Sweep, values: &[f64], seeds: &[u64]) -> Result<Vec<AblationRow>> {
    cfg.validate()?;
    let corpus = load_corpus(&cfg.data_dir)?;
    let test = corpus
        .split("test")
        .ok_or_else(|| anyhow!("data dir has no test split").context(Exit(EXIT_IO)))?;
    let mut rows = Vec::new();
    for &seed in seeds {
        for &value in values {
            let mut run = RunConfig { seed, ..cfg.clone() };
            match sweep {
                Sweep::Fractions => run.annotated_fraction = value,
                Sweep::Lambdas => run.lambda = value,
            }
            run.validate()?;
            let model_config = run.model_config(corpus.vocabulary.len());
            let outcome = iega_core::training::train(&corpus, &run.train_config(), &model_config)
                .map_err(train_exit)?;
            let model = TrainedModel::new(outcome.best_params, outcome.vocabulary);
            let (r, _) = evaluate_model(&model, test, &run.ranking_policy())?;
            log::info!("{sweep:?} {value} seed {seed}: acc {:.4} hr {:?}", r.accuracy, r.hit_rate);
            rows.push(AblationRow {
                fraction: value,
                seed,
                acc: r.accuracy,
                f1: r.macro_f1,
                mrr: r.mrr,
                hr: r.hit_rate,
                aopc: r.aopc,
                ph_acc: r.post_hoc_accuracy,
            });
        }
    }
    Ok(rows)
}

pub fn ablation_csv(rows: &[AblationRow], sweep: Sweep) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let first = match sweep {
        Sweep::Fractions => "fraction",
        Sweep::Lambdas => "lambda",
    };
    w.write_record([first, "seed", "acc", "f1", "mrr", "hr", "aopc", "ph_acc"])?;
    let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    for r in rows {
        w.write_record([
            r.fraction.to_string(),
            r.seed.to_string(),
            r.acc.to_string(),
            r.f1.to_string(),
            opt(r.mrr),
            opt(r.hr),
            r.aopc.to_string(),
            r.ph_acc.to_string(),
        ])?;
    }
    Ok(String::from_utf8(w.into_inner()?)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Transform {
    Adddiff,
    Revnon,
    Identity,
}

impl std::fmt::Display for Transform {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Transform::Adddiff => "adddiff",
            Transform::Revnon => "revnon",
            Transform::Identity => "identity",
        })
    }
}

/// Original and transformed versions of the examples the transform applies
/// to. RevNon keeps only examples where at least one opinion word changed;
/// results longer than `max_len` tokens are dropped.
pub fn transform_split(
    split: &[Example],
    transform: Transform,
    lexicon: &Lexicon,
    seed: u64,
    max_len: usize,
) -> Result<(Vec<Example>, Vec<Example>)> {
    let mut original = Vec::new();
    let mut transformed = Vec::new();
    match transform {
        Transform::Identity => {
            original = split.to_vec();
            transformed = split.to_vec();
        }
        Transform::Adddiff => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            for e in split {
                match add_diff(e, lexicon, &mut rng) {
                    Ok(t) if t.len() > max_len => {
                        log::debug!("adddiff skipped {}: {} tokens exceed {max_len}", e.id, t.len());
                    }
                    Ok(t) => {
                        original.push(e.clone());
                        transformed.push(t);
                    }
                    Err(err) => log::debug!("adddiff skipped {}: {err}", e.id),
                }
            }
        }
        Transform::Revnon => {
            for group in group_by_sentence(split) {
                let members: Vec<Example> = group.iter().map(|&i| split[i].clone()).collect();
                for (t, &i) in group.iter().enumerate() {
                    let out = rev_non(&members, t, lexicon);
                    if out.flag.is_none() && out.swapped > 0 && out.example.len() <= max_len {
                        original.push(split[i].clone());
                        transformed.push(out.example);
                    }
                }
            }
        }
    }
    if transformed.is_empty() {
        return Err(anyhow!("{transform:?} applies to no example of the split")
            .context(Exit(EXIT_INAPPLICABLE)));
    }
    Ok((original, transformed))
}

#[derive(Debug, Clone, Serialize)]
pub struct RobustnessReport {
    pub transform: Transform,
    pub parameters: serde_json::Value,
    pub n_examples: usize,
    pub n_skipped: usize,
    pub original: EvalReport,
    pub transformed: EvalReport,
    pub delta_accuracy: f64,
    pub delta_macro_f1: f64,
}

pub fn robustness(
    model: &TrainedModel,
    split: &[Example],
    transform: Transform,
    seed: u64,
    policy: &RankingPolicy,
) -> Result<RobustnessReport> {
    let lexicon = Lexicon::default();
    let max_len = model.params.config.max_len;
    let (original, transformed) = transform_split(split, transform, &lexicon, seed, max_len)?;
    let (o, _) = evaluate_model(model, &original, policy)?;
    let (t, _) = evaluate_model(model, &transformed, policy)?;
    Ok(RobustnessReport {
        transform,
        parameters: serde_json::json!({ "seed": seed, "lexicon": "default", "max_len": max_len }),
        n_examples: original.len(),
        n_skipped: split.len() - original.len(),
        delta_accuracy: t.accuracy - o.accuracy,
        delta_macro_f1: t.macro_f1 - o.macro_f1,
        original: o,
        transformed: t,
    })
}

pub fn write_records(records: &[SaliencyRecord], path: &Path) -> Result<()> {
    let mut buf = Vec::new();
    for r in records {
        serde_json::to_writer(&mut buf, r)?;
        buf.push(b'\n');
    }
    write_atomic(path, &buf)
}
