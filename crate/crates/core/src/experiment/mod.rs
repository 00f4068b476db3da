//! End-to-end evaluation: model construction, per-shop adaptation of test
//! shops, user-targeting and rating metrics, and the synthetic comparison
//! of meta-training against pooled and single-shop training.

mod compare;
mod movielens;
mod rating;
mod targeting;

use std::collections::BTreeMap;

pub use compare::{
    run_comparison, train_meta, train_pooled, with_sampled_negatives, ComparisonConfig, ComparisonOutcome, OneShopOutcome,
};
pub use movielens::{new_shop_mean, run_movielens, run_movielens_on, MovieLensConfig, MovieLensOutcome};
pub use rating::rating_metrics;
pub use targeting::{baseline_targeting_metrics, targeting_metrics, CutoffK, TargetingOptions};

use crate::datapipe::{build_tasks, FeatureStore, InteractionRecord, ShopTask};
use crate::error::{Error, Result};
use crate::metaopt::{meta_inference, MetaConfig, TaskBatch};
use crate::models::{BaselineParams, ModelKind};
use crate::numcore::{ModelParameters, ModelSpec};
use crate::rng;

/// Architecture of a scoring model.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelConfig {
    pub kind: ModelKind,
    pub hidden: Vec<usize>,
    /// Width of each categorical embedding; ignored for dense features.
    pub embedding_dim: usize,
    pub bias: bool,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            kind: ModelKind::MeSh,
            hidden: vec![32, 16],
            embedding_dim: 32,
            bias: true,
        }
    }
}

/// Fresh parameters whose encoders match the feature tables of `store`.
pub fn init_model(cfg: &ModelConfig, store: &FeatureStore, seed: u64) -> Result<ModelParameters> {
    let variant = cfg
        .kind
        .variant()
        .ok_or_else(|| Error::Config(format!("model kind `{}` has no scoring network", cfg.kind.name())))?;
    let mut r = rng::seeded(seed);
    let user = store.users.encoder(cfg.embedding_dim, &mut r);
    let item = store.items.encoder(cfg.embedding_dim, &mut r);
    let spec = ModelSpec {
        variant,
        hidden: cfg.hidden.clone(),
        bias: cfg.bias,
    };
    ModelParameters::init(&spec, user, item, &mut r)
}

/// Fresh distance-baseline parameters over dense item features of width
/// `item_dim`.
pub fn init_baseline(item_dim: usize, hidden: &[usize], margin: f64, neg_weight: f64, seed: u64) -> Result<BaselineParams> {
    BaselineParams::init(item_dim, hidden, margin, neg_weight, &mut rng::seeded(seed))
}

/// Splits every test shop into an adaptation support set of `support_size`
/// records and an evaluation query set. Shops with no more than
/// `support_size` records are returned separately.
pub fn test_tasks(test: &[InteractionRecord], support_size: usize, seed: u64) -> Result<(Vec<ShopTask>, Vec<u64>)> {
    let tasks = build_tasks(test, support_size + 1, support_size, seed)?;
    let mut shops: Vec<u64> = test.iter().map(|r| r.shop_id).collect();
    shops.sort_unstable();
    shops.dedup();
    let skipped = shops.into_iter().filter(|s| !tasks.iter().any(|t| t.shop_id == *s)).collect();
    Ok((tasks, skipped))
}

/// Adapts `theta` to every task on its support set.
pub fn adapt_shops(
    theta: &ModelParameters,
    tasks: &[ShopTask],
    store: &FeatureStore,
    cfg: &MetaConfig,
) -> Result<BTreeMap<u64, ModelParameters>> {
    let batches = tasks
        .iter()
        .map(|t| {
            if t.support.is_empty() {
                return Err(Error::EmptyBatch("shop support set"));
            }
            Ok(TaskBatch {
                shop_id: t.shop_id,
                support: store.examples(&t.support)?,
                query: Vec::new(),
                size_class: t.size_class,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    meta_inference(theta, &batches, cfg)
}

/// Parameters used to score each shop.
#[derive(Debug, Clone, Copy)]
pub enum ShopModels<'a> {
    Shared(&'a ModelParameters),
    PerShop(&'a BTreeMap<u64, ModelParameters>),
}

impl<'a> ShopModels<'a> {
    pub fn get(&self, shop: u64) -> Result<&'a ModelParameters> {
        match self {
            ShopModels::Shared(p) => Ok(p),
            ShopModels::PerShop(m) => m.get(&shop).ok_or_else(|| Error::Unknown {
                kind: "adapted shop",
                id: shop.to_string(),
            }),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datapipe::{generate_synthetic, SyntheticSpec};

    #[test]
    fn test_tasks_report_short_shops() {
        let mut recs: Vec<InteractionRecord> = (0..12).map(|u| InteractionRecord::new(u, 1, 7, 1.0)).collect();
        recs.extend((0..3).map(|u| InteractionRecord::new(u, 2, 9, 1.0)));
        let (tasks, skipped) = test_tasks(&recs, 10, 0).unwrap();
        assert_eq!(tasks.len(), 1);
        assert_eq!(tasks[0].support.len(), 10);
        assert_eq!(skipped, vec![9]);
    }

    #[test]
    fn zero_alpha_adaptation_is_identity() {
        let data = generate_synthetic(&SyntheticSpec {
            n_users: 100,
            n_items: 200,
            n_shops: 4,
            n_new_shops: 1,
            n_interactions: 1000,
            seed: 3,
            ..Default::default()
        })
        .unwrap();
        let store = data.feature_store().unwrap();
        let theta = init_model(&ModelConfig::default(), &store, 1).unwrap();
        let (tasks, _) = test_tasks(&data.test, 10, 0).unwrap();
        let cfg = MetaConfig {
            alpha: 0.0,
            ..Default::default()
        };
        let adapted = adapt_shops(&theta, &tasks, &store, &cfg).unwrap();
        assert_eq!(adapted.len(), tasks.len());
        assert!(adapted.values().all(|p| *p == theta));
    }

    #[test]
    fn baseline_kind_has_no_network() {
        let data = generate_synthetic(&SyntheticSpec {
            n_users: 50,
            n_items: 100,
            n_shops: 2,
            n_new_shops: 0,
            n_interactions: 200,
            seed: 3,
            ..Default::default()
        })
        .unwrap();
        let cfg = ModelConfig {
            kind: ModelKind::Baseline,
            ..Default::default()
        };
        assert!(matches!(init_model(&cfg, &data.feature_store().unwrap(), 0), Err(Error::Config(_))));
    }
}
