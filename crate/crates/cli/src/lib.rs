//! Command-line front end for the IEGA laboratory.

use std::fmt;
use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};

pub mod commands;
pub mod config;
pub mod render;

use commands::{ExplainFormat, Sweep, Transform};
use config::RunConfig;

pub const EXIT_CONFIG: u8 = 2;
pub const EXIT_IO: u8 = 3;
pub const EXIT_DATA: u8 = 4;
pub const EXIT_CHECKPOINT: u8 = 5;
pub const EXIT_INAPPLICABLE: u8 = 6;

/// Process exit code attached to an error as context.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Exit(pub u8);

impl fmt::Display for Exit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self.0 {
            EXIT_CONFIG => "configuration error",
            EXIT_IO => "I/O error",
            EXIT_DATA => "data error",
            EXIT_CHECKPOINT => "checkpoint error",
            EXIT_INAPPLICABLE => "transform not applicable",
            _ => "error",
        })
    }
}

impl std::error::Error for Exit {}

/// Outermost exit code in the error chain; 1 when none is attached.
pub fn exit_code(err: &anyhow::Error) -> u8 {
    err.downcast_ref::<Exit>().map_or(1, |e| e.0)
}

#[derive(Debug, Parser)]
#[command(name = "iega", version, about = "Gradient-corrected aspect sentiment laboratory")]
pub struct Cli {
    /// Machine-readable JSON on standard output.
    #[arg(long, global = true)]
    pub json: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args, Default, Clone)]
pub struct ConfigArgs {
    /// Flat JSON run configuration.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Override any config key (repeatable), e.g. --set epochs=5.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub set: Vec<String>,
    #[arg(long)]
    pub data_dir: Option<PathBuf>,
    #[arg(long)]
    pub run_dir: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub lambda: Option<f64>,
    /// Fraction of training examples whose opinion annotation is visible.
    #[arg(long)]
    pub fraction: Option<f64>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub k: Option<usize>,
    /// Let aspect tokens take part in rankings.
    #[arg(long)]
    pub include_aspect_tokens: bool,
}

impl ConfigArgs {
    pub fn resolve(&self) -> Result<RunConfig> {
        let base = match &self.config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::default(),
        };
        let mut cfg = base.with_overrides(&self.set)?;
        if let Some(v) = &self.data_dir {
            cfg.data_dir = v.clone();
        }
        if let Some(v) = &self.run_dir {
            cfg.run_dir = Some(v.clone());
        }
        if let Some(v) = self.seed {
            cfg.seed = v;
        }
        if let Some(v) = self.lambda {
            cfg.lambda = v;
        }
        if let Some(v) = self.fraction {
            cfg.annotated_fraction = v;
        }
        if let Some(v) = self.epochs {
            cfg.epochs = v;
        }
        if let Some(v) = self.k {
            cfg.k = v;
        }
        if self.include_aspect_tokens {
            cfg.exclude_aspect_tokens = false;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate synthetic train/valid/test JSONL splits and a manifest.
    GenData {
        #[command(flatten)]
        cfg: ConfigArgs,
        /// Output directory (defaults to the config's data_dir).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Convert a TOWE-style TSV file to JSONL.
    ImportTowe {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train a model into a run directory.
    Train {
        #[command(flatten)]
        cfg: ConfigArgs,
    },
    /// Evaluate a checkpoint on a split.
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
        /// Split name in the data dir, or a JSONL path.
        #[arg(long, default_value = "test")]
        split: String,
        /// Per-example details as JSON lines.
        #[arg(long)]
        details: Option<PathBuf>,
        #[command(flatten)]
        cfg: ConfigArgs,
    },
    /// Render token saliency heatmaps.
    Explain {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long, default_value = "test")]
        split: String,
        /// Explain only this example.
        #[arg(long)]
        id: Option<String>,
        #[arg(long, value_enum, default_value = "text")]
        format: ExplainFormat,
        /// Output file (standard output when absent).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Raw saliency maps as JSON lines.
        #[arg(long)]
        saliency_out: Option<PathBuf>,
        #[command(flatten)]
        cfg: ConfigArgs,
    },
    /// Sweep annotation fractions or lambdas over paired seeds.
    Ablate {
        #[arg(long, value_delimiter = ',', conflicts_with = "lambdas")]
        fractions: Option<Vec<f64>>,
        #[arg(long, value_delimiter = ',')]
        lambdas: Option<Vec<f64>>,
        #[arg(long, value_delimiter = ',', default_value = "0,1,2,3,4")]
        seeds: Vec<u64>,
        /// CSV output (defaults to ablation.csv in the run directory).
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        cfg: ConfigArgs,
    },
    /// Compare a checkpoint on original and transformed examples.
    Robustness {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long, default_value = "test")]
        split: String,
        #[arg(long, value_enum)]
        transform: Transform,
        #[command(flatten)]
        cfg: ConfigArgs,
    },
}

fn emit(json: bool, value: &impl serde::Serialize, human: impl FnOnce() -> String) -> Result<()> {
    if json {
        println!("{}", serde_json::to_string_pretty(value)?);
    } else {
        print!("{}", human());
    }
    Ok(())
}

pub fn run(cli: Cli) -> Result<()> {
    let json = cli.json;
    match cli.command {
        Command::GenData { cfg, out } => {
            let cfg = cfg.resolve()?;
            let out = out.unwrap_or_else(|| cfg.data_dir.clone());
            let manifest = commands::gen_data(&cfg, &out)?;
            emit(json, &manifest, || {
                let counts: Vec<String> =
                    manifest.counts.iter().map(|(k, v)| format!("{k} {v}")).collect();
                format!("wrote {} ({}; seed {})\n", out.display(), counts.join(", "), manifest.seed)
            })
        }
        Command::ImportTowe { input, out } => {
            let (n, skipped) = commands::import(&input, &out)?;
            for (line, reason) in &skipped {
                eprintln!("skipped line {line}: {reason}");
            }
            let summary = serde_json::json!({ "imported": n, "skipped": skipped.len() });
            emit(json, &summary, || {
                format!("imported {n} examples, skipped {}\n", skipped.len())
            })
        }
        Command::Train { cfg } => {
            let cfg = cfg.resolve()?;
            let summary = commands::train_run(&cfg)?;
            emit(json, &summary, || {
                let mut s = format!(
                    "run {} (best epoch {})\n",
                    summary.run_dir.display(),
                    summary.best_epoch
                );
                if let Some(r) = &summary.validation {
                    s.push_str(&r.to_table());
                }
                s
            })
        }
        Command::Eval { checkpoint, split, details, cfg } => {
            let cfg = cfg.resolve()?;
            let model = commands::load_checkpoint(&checkpoint)?;
            let examples = commands::load_split(&cfg.data_dir, &split)?;
            let (report, rows) = commands::evaluate_model(&model, &examples, &cfg.ranking_policy())?;
            if let Some(path) = details {
                commands::write_details(&rows, &path)?;
            }
            emit(json, &report, || report.to_table())
        }
        Command::Explain { checkpoint, split, id, format, out, saliency_out, cfg } => {
            let cfg = cfg.resolve()?;
            let model = commands::load_checkpoint(&checkpoint)?;
            let examples = commands::load_split(&cfg.data_dir, &split)?;
            let (rendered, records) =
                commands::explain_examples(&model, &examples, id.as_deref(), format)?;
            if let Some(path) = saliency_out {
                commands::write_records(&records, &path)?;
            }
            match out {
                Some(path) => commands::write_atomic(&path, rendered.as_bytes())
                    .with_context(|| format!("writing {}", path.display())),
                None => {
                    print!("{rendered}");
                    Ok(())
                }
            }
        }
        Command::Ablate { fractions, lambdas, seeds, out, cfg } => {
            let cfg = cfg.resolve()?;
            let (sweep, values) = match (fractions, lambdas) {
                (_, Some(l)) => (Sweep::Lambdas, l),
                (Some(f), None) => (Sweep::Fractions, f),
                (None, None) => (Sweep::Fractions, vec![0.1, 0.2, 0.5, 1.0]),
            };
            let rows = commands::ablate(&cfg, sweep, &values, &seeds)?;
            let csv = commands::ablation_csv(&rows, sweep)?;
            let path = out.unwrap_or_else(|| cfg.resolve_run_dir().join("ablation.csv"));
            if let Some(parent) = path.parent() {
                std::fs::create_dir_all(parent)
                    .with_context(|| format!("creating {}", parent.display()))
                    .context(Exit(EXIT_IO))?;
            }
            commands::write_atomic(&path, csv.as_bytes())?;
            emit(json, &rows, || csv.clone())
        }
        Command::Robustness { checkpoint, split, transform, cfg } => {
            let cfg = cfg.resolve()?;
            let model = commands::load_checkpoint(&checkpoint)?;
            let examples = commands::load_split(&cfg.data_dir, &split)?;
            let report =
                commands::robustness(&model, &examples, transform, cfg.seed, &cfg.ranking_policy())?;
            emit(json, &report, || {
                format!(
                    "transform {} on {} examples ({} skipped)\n\
                     accuracy  {:.4} -> {:.4} ({:+.4})\n\
                     macro_f1  {:.4} -> {:.4} ({:+.4})\n",
                    report.transform,
                    report.n_examples,
                    report.n_skipped,
                    report.original.accuracy,
                    report.transformed.accuracy,
                    report.delta_accuracy,
                    report.original.macro_f1,
                    report.transformed.macro_f1,
                    report.delta_macro_f1
                )
            })
        }
    }
}
