use std::collections::BTreeMap;

use rand::seq::index;

use super::{adapt_shops, init_model, targeting_metrics, test_tasks, ModelConfig, ShopModels, TargetingOptions};
use crate::datapipe::{
    build_tasks_by, classify_shops, generate_synthetic, negative_sample, FeatureStore, InteractionRecord, NegativeStrategy, ShopTaxonomy,
    SyntheticSpec,
};
use crate::error::{Error, Result};
use crate::metaopt::{meta_train, nonmeta_train, one_shop_train, MetaConfig, MetaOutcome, OuterOptimizer, PlainConfig, PlainOutcome, RegularizerKind, Schedule};
use crate::metrics::{aggregate_report, EvaluationReport, DEFAULT_THRESHOLDS};
use crate::numcore::{LossKind, ModelParameters, Objective};
use crate::rng;

/// Meta-trains from `init` on tasks built from `train`, labelled with the
/// sampling classes of `taxonomy`.
#[allow(clippy::too_many_arguments)]
pub fn train_meta(
    init: &ModelParameters,
    train: &[InteractionRecord],
    store: &FeatureStore,
    taxonomy: &ShopTaxonomy,
    cfg: &MetaConfig,
    schedule: Schedule,
    min_task_interactions: usize,
    regularizer: Option<RegularizerKind>,
) -> Result<MetaOutcome> {
    let mut tasks = build_tasks_by(train, cfg.task_unit, min_task_interactions, cfg.support_size, cfg.seed)?;
    taxonomy.label_tasks(&mut tasks);
    meta_train(init, &tasks, store, cfg, schedule, regularizer)
}

/// Pooled non-meta training on every record of `train`.
pub fn train_pooled(
    init: &ModelParameters,
    train: &[InteractionRecord],
    store: &FeatureStore,
    cfg: &PlainConfig,
) -> Result<PlainOutcome<ModelParameters>> {
    nonmeta_train(init, &store.examples(train)?, cfg)
}

/// Positive records of `train` followed by negatives drawn with `strategy`.
pub fn with_sampled_negatives(
    train: &[InteractionRecord],
    strategy: NegativeStrategy,
    taxonomy: &ShopTaxonomy,
    ratio: f64,
    seed: u64,
) -> Result<Vec<InteractionRecord>> {
    let positives: Vec<InteractionRecord> = train.iter().filter(|r| r.label > 0.0).cloned().collect();
    let negatives = negative_sample(&positives, strategy, taxonomy, ratio, seed)?;
    let mut out = positives;
    out.extend(negatives);
    Ok(out)
}

/// Synthetic head-to-head of meta-training, pooled training and single-shop
/// training under one seed.
#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonConfig {
    pub data: SyntheticSpec,
    pub model: ModelConfig,
    pub meta: MetaConfig,
    pub schedule: Schedule,
    pub min_task_interactions: usize,
    pub regularizer: Option<RegularizerKind>,
    pub pooled: PlainConfig,
    /// Number of existing test shops trained independently; 0 skips the
    /// single-shop arm.
    pub one_shop_count: usize,
    pub one_shop: PlainConfig,
    /// Replace the labelled negatives of the training data with sampled ones.
    pub negatives: Option<(NegativeStrategy, f64)>,
    pub targeting: TargetingOptions,
    pub thresholds: Vec<f64>,
}

impl Default for ComparisonConfig {
    fn default() -> Self {
        let objective = Objective::for_labels(LossKind::BinaryCrossEntropy, true);
        let pooled = PlainConfig {
            stepsize: 0.002,
            epochs: 10,
            batch_size: Some(64),
            objective,
            ..Default::default()
        };
        Self {
            data: SyntheticSpec {
                latent_dim: 16,
                shop_effect: 1.5,
                threshold: 1.0,
                ..Default::default()
            },
            model: ModelConfig::default(),
            meta: MetaConfig {
                alpha: 0.15,
                beta: 0.002,
                local_steps: 2,
                shop_batch_size: 8,
                support_size: 10,
                query_size: Some(64),
                objective,
                outer_optimizer: OuterOptimizer::Adam,
                ..Default::default()
            },
            schedule: Schedule {
                meta_steps: 2000,
                patience: None,
            },
            min_task_interactions: 20,
            regularizer: None,
            one_shop: pooled.clone(),
            pooled,
            one_shop_count: 6,
            negatives: None,
            targeting: TargetingOptions::default(),
            thresholds: DEFAULT_THRESHOLDS.to_vec(),
        }
    }
}

impl ComparisonConfig {
    /// Applies one seed to data generation, initialization and every trainer.
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.data.seed = seed;
        self.meta.seed = seed;
        self.pooled.seed = seed;
        self.one_shop.seed = seed;
        self
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OneShopOutcome {
    pub shops: Vec<u64>,
    pub one_shop: EvaluationReport,
    /// Meta-trained and adapted parameters on the same shops.
    pub mesh: EvaluationReport,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonOutcome {
    pub mesh: EvaluationReport,
    pub pooled: EvaluationReport,
    pub one_shop: Option<OneShopOutcome>,
    pub meta_trace: MetaOutcome,
    pub pooled_losses: Vec<f64>,
}

const ONE_SHOP_STREAM: u64 = 0x0e5b_0f;

/// Generates the synthetic dataset, trains every arm from one shared
/// initialization and reports user-targeting recall for each.
///
/// MeSh parameters are adapted to each test shop on its support records.
/// The pooled model scores every shop with its trained parameters.
pub fn run_comparison(cfg: &ComparisonConfig) -> Result<ComparisonOutcome> {
    let data = generate_synthetic(&cfg.data)?;
    let store = data.feature_store()?;
    let taxonomy = classify_shops(&data.train, &data.test);
    let train = match cfg.negatives {
        Some((strategy, ratio)) => with_sampled_negatives(&data.train, strategy, &taxonomy, ratio, cfg.meta.seed)?,
        None => data.train.clone(),
    };
    let init = init_model(&cfg.model, &store, cfg.meta.seed)?;
    let (mut tasks, _) = test_tasks(&data.test, cfg.meta.support_size, cfg.meta.seed)?;
    taxonomy.label_tasks(&mut tasks);
    let users: Vec<u64> = store.users.rows.keys().copied().collect();
    let report = |models: ShopModels<'_>, tasks: &[crate::datapipe::ShopTask]| -> Result<EvaluationReport> {
        let m = targeting_metrics(models, tasks, &store, &users, cfg.targeting)?;
        aggregate_report(BTreeMap::from([("recall".to_string(), m)]), &taxonomy, &cfg.thresholds)
    };

    let meta = train_meta(&init, &train, &store, &taxonomy, &cfg.meta, cfg.schedule, cfg.min_task_interactions, cfg.regularizer)?;
    let adapted = adapt_shops(&meta.params, &tasks, &store, &cfg.meta)?;
    let mesh = report(ShopModels::PerShop(&adapted), &tasks)?;

    let pooled_out = train_pooled(&init, &train, &store, &cfg.pooled)?;
    let pooled = report(ShopModels::Shared(&pooled_out.params), &tasks)?;

    let one_shop = if cfg.one_shop_count == 0 {
        None
    } else {
        let existing: Vec<usize> = (0..tasks.len()).filter(|&k| taxonomy.train_sales(tasks[k].shop_id) > 0).collect();
        if existing.len() < cfg.one_shop_count {
            return Err(Error::Config(format!(
                "{} existing test shops, one-shop arm needs {}",
                existing.len(),
                cfg.one_shop_count
            )));
        }
        let mut r = rng::stream(cfg.meta.seed, ONE_SHOP_STREAM);
        let mut picked: Vec<usize> = index::sample(&mut r, existing.len(), cfg.one_shop_count).into_iter().map(|k| existing[k]).collect();
        picked.sort_unstable();
        let chosen: Vec<_> = picked.iter().map(|&k| tasks[k].clone()).collect();
        let mut models = BTreeMap::new();
        for t in &chosen {
            let mut recs: Vec<InteractionRecord> = train.iter().filter(|r| r.shop_id == t.shop_id).cloned().collect();
            recs.extend(t.support.iter().cloned());
            let out = one_shop_train(&init, &store.examples(&recs)?, &cfg.one_shop)?;
            models.insert(t.shop_id, out.params);
        }
        Some(OneShopOutcome {
            shops: chosen.iter().map(|t| t.shop_id).collect(),
            one_shop: report(ShopModels::PerShop(&models), &chosen)?,
            mesh: report(ShopModels::PerShop(&adapted), &chosen)?,
        })
    };

    Ok(ComparisonOutcome {
        mesh,
        pooled,
        one_shop,
        meta_trace: meta,
        pooled_losses: pooled_out.epoch_losses,
    })
}
