use std::path::Path;

use super::{adapt_shops, init_model, rating_metrics, test_tasks, train_meta, train_pooled, ModelConfig, ShopModels};
use crate::datapipe::{classify_shops, load_movielens, MovieLensData, MovieLensOptions};
use crate::error::Result;
use crate::metaopt::{MetaConfig, OuterOptimizer, PlainConfig, Schedule};
use crate::metrics::{aggregate_report, EvaluationReport, DEFAULT_THRESHOLDS};
use crate::models::ModelKind;
use crate::numcore::Objective;

/// Genre-as-shop rating experiment: meta-trained joint MLP against the pooled
/// Wide&Deep-style comparator.
#[derive(Debug, Clone, PartialEq)]
pub struct MovieLensConfig {
    pub options: MovieLensOptions,
    pub mesh: ModelConfig,
    pub comparator: ModelConfig,
    pub meta: MetaConfig,
    pub schedule: Schedule,
    pub min_task_interactions: usize,
    pub pooled: PlainConfig,
    pub ndcg_ks: Vec<usize>,
    pub thresholds: Vec<f64>,
}

impl Default for MovieLensConfig {
    fn default() -> Self {
        let model = |kind| ModelConfig {
            kind,
            hidden: vec![128, 100],
            embedding_dim: 32,
            bias: true,
        };
        Self {
            options: MovieLensOptions {
                holdout_genres: vec!["Documentary".into(), "Horror".into(), "Western".into()],
                ..Default::default()
            },
            mesh: model(ModelKind::MeShI),
            comparator: model(ModelKind::WideDeep),
            meta: MetaConfig {
                alpha: 5e-6,
                beta: 5e-5,
                local_steps: 2,
                shop_batch_size: 32,
                support_size: 10,
                query_size: Some(256),
                objective: Objective::SQUARED,
                model_kind: ModelKind::MeShI,
                outer_optimizer: OuterOptimizer::Adam,
                ..Default::default()
            },
            schedule: Schedule {
                meta_steps: 3000,
                patience: Some(20),
            },
            min_task_interactions: 20,
            pooled: PlainConfig {
                stepsize: 5e-5,
                epochs: 20,
                batch_size: Some(32),
                objective: Objective::SQUARED,
                ..Default::default()
            },
            ndcg_ks: vec![1, 3],
            thresholds: DEFAULT_THRESHOLDS.to_vec(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MovieLensOutcome {
    pub mesh: EvaluationReport,
    pub comparator: EvaluationReport,
    pub train_records: usize,
    pub test_records: usize,
}

/// Runs the experiment on already loaded data.
pub fn run_movielens_on(data: &MovieLensData, cfg: &MovieLensConfig) -> Result<MovieLensOutcome> {
    let store = &data.features;
    let taxonomy = classify_shops(&data.train, &data.test);
    let (mut tasks, _) = test_tasks(&data.test, cfg.meta.support_size, cfg.meta.seed)?;
    taxonomy.label_tasks(&mut tasks);
    let report = |models: ShopModels<'_>| -> Result<EvaluationReport> {
        let m = rating_metrics(models, &tasks, store, &cfg.meta.objective, &cfg.ndcg_ks)?;
        aggregate_report(m, &taxonomy, &cfg.thresholds)
    };

    let init = init_model(&cfg.mesh, store, cfg.meta.seed)?;
    let meta = train_meta(&init, &data.train, store, &taxonomy, &cfg.meta, cfg.schedule, cfg.min_task_interactions, None)?;
    let adapted = adapt_shops(&meta.params, &tasks, store, &cfg.meta)?;
    let mesh = report(ShopModels::PerShop(&adapted))?;

    let init = init_model(&cfg.comparator, store, cfg.pooled.seed)?;
    let pooled = train_pooled(&init, &data.train, store, &cfg.pooled)?;
    let comparator = report(ShopModels::Shared(&pooled.params))?;
    Ok(MovieLensOutcome {
        mesh,
        comparator,
        train_records: data.train.len(),
        test_records: data.test.len(),
    })
}

/// Loads MovieLens-1M from `dir` and runs the experiment.
pub fn run_movielens(dir: &Path, cfg: &MovieLensConfig) -> Result<MovieLensOutcome> {
    run_movielens_on(&load_movielens(dir, &cfg.options)?, cfg)
}

/// New-shop shop-level mean of `metric`, if any new shop was scored.
pub fn new_shop_mean(report: &EvaluationReport, metric: &str) -> Option<f64> {
    let block = report.metrics.get(metric)?;
    block.by_class.get(&crate::datapipe::ShopClass::New).map(|a| a.shop_mean)
}
