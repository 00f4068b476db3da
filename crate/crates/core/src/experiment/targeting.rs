use std::collections::{BTreeMap, BTreeSet};

use rayon::prelude::*;

use super::ShopModels;
use crate::datapipe::{FeatureStore, ShopTask};
use crate::error::{Error, Result};
use crate::metrics::{recall_at_k, MetricInput, QueryMetric, RankedPrediction, RecallMode};
use crate::models::{baseline_user_representation, BaselineParams};
use crate::numcore::{ModelParameters, Network};

/// Cutoff of the user ranking.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CutoffK {
    Absolute(usize),
    /// Share of the candidate pool, rounded up, at least 1.
    Fraction(f64),
}

impl CutoffK {
    pub fn resolve(self, pool: usize) -> Result<usize> {
        let k = match self {
            CutoffK::Absolute(k) => k,
            CutoffK::Fraction(f) => {
                if !(f > 0.0 && f <= 1.0) {
                    return Err(Error::Config(format!("cutoff fraction {f} outside (0, 1]")));
                }
                ((f * pool as f64).ceil() as usize).max(1)
            }
        };
        if k == 0 || k > pool {
            return Err(Error::Config(format!("cutoff {k} outside 1..={pool}")));
        }
        Ok(k)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TargetingOptions {
    pub k: CutoffK,
    pub mode: RecallMode,
}

impl Default for TargetingOptions {
    fn default() -> Self {
        Self {
            k: CutoffK::Fraction(0.1),
            mode: RecallMode::Standard,
        }
    }
}

/// Scores of every user in `users` for one item. Two-tower models reuse the
/// precomputed user tower outputs in `user_emb`.
fn score_users(
    params: &ModelParameters,
    store: &FeatureStore,
    users: &[u64],
    user_emb: Option<&[Vec<f64>]>,
    item: u64,
) -> Result<Vec<f64>> {
    let feat = store.item(item)?;
    match (&params.network, user_emb) {
        (Network::TwoTower { item: tower, .. }, Some(emb)) => {
            let hi = tower.forward(&params.item_encoder.encode(feat)?)?;
            Ok(emb.iter().map(|hu| hu.iter().zip(&hi).map(|(a, b)| a * b).sum()).collect())
        }
        _ => users.iter().map(|&u| params.score(store.user(u)?, feat)).collect(),
    }
}

fn user_embeddings(params: &ModelParameters, store: &FeatureStore, users: &[u64]) -> Result<Option<Vec<Vec<f64>>>> {
    match &params.network {
        Network::TwoTower { user, .. } => users
            .iter()
            .map(|&u| user.forward(&params.user_encoder.encode(store.user(u)?)?))
            .collect::<Result<Vec<_>>>()
            .map(Some),
        Network::Joint(_) => Ok(None),
    }
}

/// Recall of every query item of `task`, with `score_item` giving the score
/// of each user in `users` for an item.
fn shop_recalls<F>(task: &ShopTask, users: &[u64], opts: TargetingOptions, score_item: F) -> Result<(Vec<QueryMetric>, usize)>
where
    F: Fn(u64) -> Result<Vec<f64>>,
{
    let mut relevant: BTreeMap<u64, BTreeSet<u64>> = BTreeMap::new();
    for r in &task.query {
        let e = relevant.entry(r.item_id).or_default();
        if r.label > 0.0 {
            e.insert(r.user_id);
        }
    }
    let mut known: BTreeMap<u64, BTreeSet<u64>> = BTreeMap::new();
    for r in task.support.iter().filter(|r| r.label > 0.0) {
        known.entry(r.item_id).or_default().insert(r.user_id);
    }
    let none = BTreeSet::new();
    let mut out = Vec::new();
    let mut undefined = 0;
    for (&item, rel) in &relevant {
        if rel.is_empty() {
            undefined += 1;
            continue;
        }
        let scores = score_item(item)?;
        let skip = known.get(&item).unwrap_or(&none);
        let candidates: Vec<(u64, f64)> = users
            .iter()
            .zip(scores)
            .filter(|(u, _)| !skip.contains(u))
            .map(|(&u, s)| (u, s))
            .collect();
        let k = opts.k.resolve(candidates.len())?;
        let relevance = rel.iter().map(|&u| (u, 1.0)).collect();
        let pred = RankedPrediction::new(item, candidates, relevance)?;
        out.push(QueryMetric {
            query_id: item,
            shop_id: task.shop_id,
            value: recall_at_k(&pred, k, opts.mode)?,
        });
    }
    Ok((out, undefined))
}

fn collect(per_shop: Vec<(Vec<QueryMetric>, usize)>) -> MetricInput {
    let mut values = Vec::new();
    let mut undefined = 0;
    for (v, u) in per_shop {
        values.extend(v);
        undefined += u;
    }
    MetricInput {
        values,
        undefined,
        degenerate: 0,
    }
}

/// Per-item user-targeting recall on the query records of each task.
///
/// Every user in `users` is a candidate for every query item except users
/// already known as buyers of that item from the support set. Relevant users
/// are the item's positive query records. Items without one are counted as
/// undefined.
pub fn targeting_metrics(
    models: ShopModels<'_>,
    tasks: &[ShopTask],
    store: &FeatureStore,
    users: &[u64],
    opts: TargetingOptions,
) -> Result<MetricInput> {
    if users.is_empty() {
        return Err(Error::EmptyBatch("candidate users"));
    }
    let per_shop = tasks
        .par_iter()
        .map(|t| {
            let params = models.get(t.shop_id)?;
            let emb = user_embeddings(params, store, users)?;
            shop_recalls(t, users, opts, |item| score_users(params, store, users, emb.as_deref(), item))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(collect(per_shop))
}

/// User-targeting recall of the distance baseline, under the same candidate
/// and relevance rules as [`targeting_metrics`].
///
/// A user is represented by the mean mapped features of the items listed in
/// `histories`; users without history score negative infinity and rank
/// last.
pub fn baseline_targeting_metrics(
    params: &BaselineParams,
    histories: &BTreeMap<u64, Vec<u64>>,
    tasks: &[ShopTask],
    store: &FeatureStore,
    users: &[u64],
    opts: TargetingOptions,
) -> Result<MetricInput> {
    if users.is_empty() {
        return Err(Error::EmptyBatch("candidate users"));
    }
    let reps = users
        .iter()
        .map(|u| match histories.get(u).filter(|h| !h.is_empty()) {
            Some(items) => {
                let feats = items.iter().map(|&i| store.item(i)).collect::<Result<Vec<_>>>()?;
                baseline_user_representation(params, &feats).map(Some)
            }
            None => Ok(None),
        })
        .collect::<Result<Vec<_>>>()?;
    let per_shop = tasks
        .par_iter()
        .map(|t| {
            shop_recalls(t, users, opts, |item| {
                let fx = params.map_item(store.item(item)?)?;
                Ok(reps
                    .iter()
                    .map(|r| match r {
                        Some(u) => -u.iter().zip(&fx).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt(),
                        None => f64::NEG_INFINITY,
                    })
                    .collect())
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(collect(per_shop))
}
