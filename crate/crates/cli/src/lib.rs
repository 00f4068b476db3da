//! Command-line driver: synthetic data generation, training, per-shop
//! adaptation, evaluation, ablation grids and report tables.
//!
//! Exit codes: 0 success, 1 configuration error, 2 data error, 3 numeric
//! failure.

pub mod commands;
pub mod config;
pub mod output;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use meshop::{Error, ErrorCategory, Result};

use crate::config::RunConfig;

#[derive(Debug, Parser)]
#[command(name = "meshop", version, about = "Shop-level meta-learning for cold-start item advertisement")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

/// Flags shared by every configurable command. They override the file.
#[derive(Debug, Args)]
pub struct Common {
    /// TOML run config, or the manifest of an earlier run.
    #[arg(short, long)]
    pub config: Option<PathBuf>,
    /// Seed for every sampler and initializer (mandatory here or in the file).
    #[arg(long)]
    pub seed: Option<u64>,
    /// Directory receiving outputs and the manifest.
    #[arg(short, long)]
    pub output_dir: Option<PathBuf>,
    /// Training interaction file.
    #[arg(long)]
    pub train: Option<PathBuf>,
    /// Test interaction file.
    #[arg(long)]
    pub test: Option<PathBuf>,
    /// Support interaction file.
    #[arg(long)]
    pub support: Option<PathBuf>,
    /// User feature file.
    #[arg(long)]
    pub user_features: Option<PathBuf>,
    /// Item feature file.
    #[arg(long)]
    pub item_features: Option<PathBuf>,
    /// Model kind: mesh, mesh_i, wide_deep or baseline.
    #[arg(long)]
    pub model: Option<String>,
    /// Trainer: meta, fmst, nonmeta, one_shop or baseline.
    #[arg(long)]
    pub trainer: Option<String>,
    /// Meta-training step budget.
    #[arg(long)]
    pub meta_steps: Option<usize>,
    /// Epochs of the non-meta trainers.
    #[arg(long)]
    pub epochs: Option<usize>,
    /// Inner-loop step size.
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Outer-loop step size.
    #[arg(long)]
    pub beta: Option<f64>,
    /// Fairness regularizer weight.
    #[arg(long)]
    pub gamma: Option<f64>,
    /// Fairness regularizer: option1 or option2.
    #[arg(long)]
    pub regularizer: Option<String>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic dataset with ground-truth latents.
    GenData(Common),
    /// Train a model and write `model.ckpt`.
    Train {
        #[command(flatten)]
        common: Common,
        /// Start from this checkpoint instead of a fresh initialization.
        #[arg(long)]
        init: Option<PathBuf>,
    },
    /// Adapt a meta-trained checkpoint to each shop of the support file.
    Adapt {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        checkpoint: PathBuf,
        /// Adapt only these shops (comma separated).
        #[arg(long, value_delimiter = ',')]
        shops: Option<Vec<u64>>,
    },
    /// Score the test shops and write report tables.
    Evaluate {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        checkpoint: PathBuf,
        /// Directory of per-shop checkpoints written by `adapt`.
        #[arg(long)]
        adapted: Option<PathBuf>,
        /// Metrics to compute (comma separated): recall, ndcg, mae.
        #[arg(long, value_delimiter = ',')]
        metrics: Option<Vec<String>>,
        /// Divide recall hits by k instead of by the relevant count.
        #[arg(long)]
        paper_recall: bool,
        /// Skip per-shop adaptation.
        #[arg(long, conflicts_with = "adapted")]
        no_adapt: bool,
    },
    /// Run an ablation grid on synthetic data.
    Ablation {
        #[command(flatten)]
        common: Common,
        /// one_shop, negative_sampling, debias_gamma or task_unit.
        #[arg(long)]
        name: Option<String>,
    },
    /// Side-by-side table of evaluation runs.
    Report {
        /// Run directories or report.kv files.
        #[arg(required = true)]
        runs: Vec<PathBuf>,
        /// Show only this metric.
        #[arg(long)]
        metric: Option<String>,
        /// Also write the table to this file.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

impl Common {
    /// Loads the file (if any) and applies the flags on top.
    pub fn resolve(&self) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(path) => RunConfig::load(path)?,
            None => RunConfig::default(),
        };
        if self.seed.is_some() {
            cfg.seed = self.seed;
        }
        if let Some(d) = &self.output_dir {
            cfg.output_dir = d.clone();
        }
        for (flag, slot) in [
            (&self.train, &mut cfg.data.train),
            (&self.test, &mut cfg.data.test),
            (&self.support, &mut cfg.data.support),
            (&self.user_features, &mut cfg.data.user_features),
            (&self.item_features, &mut cfg.data.item_features),
        ] {
            if flag.is_some() {
                slot.clone_from(flag);
            }
        }
        if let Some(v) = &self.model {
            cfg.model.kind = v.clone();
        }
        if let Some(v) = &self.trainer {
            cfg.train.trainer = v.clone();
        }
        if let Some(v) = self.meta_steps {
            cfg.train.meta_steps = v;
        }
        if let Some(v) = self.epochs {
            cfg.train.epochs = v;
        }
        if let Some(v) = self.alpha {
            cfg.train.alpha = v;
        }
        if let Some(v) = self.beta {
            cfg.train.beta = v;
        }
        if let Some(v) = self.gamma {
            cfg.train.gamma = v;
        }
        if self.regularizer.is_some() {
            cfg.train.regularizer.clone_from(&self.regularizer);
        }
        Ok(cfg)
    }
}

/// Runs one parsed command and returns what it prints on success.
pub fn run(cli: Cli) -> Result<String> {
    let done = |p: PathBuf| format!("wrote {}\n", p.display());
    match cli.command {
        Command::GenData(common) => commands::gen_data(&common.resolve()?).map(done),
        Command::Train { common, init } => commands::train(&common.resolve()?, init.as_deref()).map(done),
        Command::Adapt { common, checkpoint, shops } => commands::adapt(&common.resolve()?, &checkpoint, shops.as_deref()).map(done),
        Command::Evaluate {
            common,
            checkpoint,
            adapted,
            metrics,
            paper_recall,
            no_adapt,
        } => {
            let mut cfg = common.resolve()?;
            if let Some(m) = metrics {
                cfg.evaluate.metrics = m;
            }
            if paper_recall {
                cfg.evaluate.recall_mode = "paper".into();
            }
            if no_adapt {
                cfg.evaluate.adapt = Some(false);
            }
            let path = commands::evaluate(&cfg, &checkpoint, adapted.as_deref())?;
            let summary = std::fs::read_to_string(cfg.output_dir.join("summary.tsv"))?;
            Ok(format!("{summary}{}", done(path)))
        }
        Command::Ablation { common, name } => {
            let mut cfg = common.resolve()?;
            if name.is_some() {
                cfg.ablation.name = name;
            }
            let (path, table) = commands::ablation(&cfg)?;
            Ok(format!("{table}{}", done(path)))
        }
        Command::Report { runs, metric, out } => {
            let table = commands::report(&runs, metric.as_deref())?;
            if let Some(path) = out {
                output::write_atomic(&path, table.as_bytes())?;
            }
            Ok(table)
        }
    }
}

/// Process exit code of an error.
pub fn exit_code(e: &Error) -> i32 {
    match e.category() {
        ErrorCategory::Config => 1,
        ErrorCategory::Data => 2,
        ErrorCategory::Numeric => 3,
    }
}
