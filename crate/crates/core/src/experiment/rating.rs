use std::collections::BTreeMap;

use rayon::prelude::*;

use super::ShopModels;
use crate::datapipe::{FeatureStore, ShopTask};
use crate::error::{Error, Result};
use crate::metrics::{ndcg_at_k, MetricInput, QueryMetric, RankedPrediction};
use crate::numcore::{predict_batch, Objective};

type ShopRating = (BTreeMap<usize, (Vec<QueryMetric>, usize)>, Vec<QueryMetric>);

fn shop_rating(models: ShopModels<'_>, task: &ShopTask, store: &FeatureStore, objective: &Objective, ks: &[usize]) -> Result<ShopRating> {
    let params = models.get(task.shop_id)?;
    let examples = store.examples(&task.query)?;
    let preds = predict_batch(params, &examples, objective.link)?;
    let mut by_user: BTreeMap<u64, (Vec<(u64, f64)>, BTreeMap<u64, f64>)> = BTreeMap::new();
    let mut abs_err = Vec::with_capacity(preds.len());
    for (r, p) in task.query.iter().zip(&preds) {
        let e = by_user.entry(r.user_id).or_default();
        e.0.push((r.item_id, *p));
        e.1.insert(r.item_id, r.label);
        abs_err.push(QueryMetric {
            query_id: r.user_id,
            shop_id: task.shop_id,
            value: (p - r.label).abs(),
        });
    }
    let mut ndcg: BTreeMap<usize, (Vec<QueryMetric>, usize)> = ks.iter().map(|&k| (k, (Vec::new(), 0))).collect();
    for (user, (scores, relevance)) in by_user {
        let pred = RankedPrediction::new(user, scores, relevance)?;
        for &k in ks {
            let n = ndcg_at_k(&pred, k)?;
            let slot = ndcg.get_mut(&k).expect("slot per k");
            slot.1 += usize::from(n.degenerate);
            slot.0.push(QueryMetric {
                query_id: user,
                shop_id: task.shop_id,
                value: n.value,
            });
        }
    }
    Ok((ndcg, abs_err))
}

/// Rating-task metrics on the query records of each task: `ndcg@k` for each
/// `k` over every (shop, user) ranking of the user's query items, and `mae`
/// over query records.
pub fn rating_metrics(
    models: ShopModels<'_>,
    tasks: &[ShopTask],
    store: &FeatureStore,
    objective: &Objective,
    ks: &[usize],
) -> Result<BTreeMap<String, MetricInput>> {
    if ks.contains(&0) {
        return Err(Error::Config("nDCG cutoff must be at least 1".into()));
    }
    let per_shop = tasks
        .par_iter()
        .map(|t| shop_rating(models, t, store, objective, ks))
        .collect::<Result<Vec<_>>>()?;
    let mut out: BTreeMap<String, MetricInput> = BTreeMap::new();
    for (ndcg, abs_err) in per_shop {
        for (k, (values, degenerate)) in ndcg {
            let e = out.entry(format!("ndcg@{k}")).or_insert_with(|| MetricInput {
                values: Vec::new(),
                undefined: 0,
                degenerate: 0,
            });
            e.values.extend(values);
            e.degenerate += degenerate;
        }
        out.entry("mae".into())
            .or_insert_with(|| MetricInput {
                values: Vec::new(),
                undefined: 0,
                degenerate: 0,
            })
            .values
            .extend(abs_err);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datapipe::{FeatureTable, InteractionRecord, SizeClass};
    use crate::models::{FeatureEncoder, FeatureInput};
    use crate::numcore::{Activation, DenseLayer, Mlp, ModelParameters, Network};

    #[test]
    fn perfect_predictions_give_unit_ndcg_and_zero_mae() {
        // joint model echoing the item feature, which equals the rating
        let users = BTreeMap::from([(0, FeatureInput::Dense(vec![0.0])), (1, FeatureInput::Dense(vec![0.0]))]);
        let items = (1..=5).map(|i| (i, FeatureInput::Dense(vec![i as f64]))).collect();
        let store = FeatureStore {
            users: FeatureTable::dense(users).unwrap(),
            items: FeatureTable::dense(items).unwrap(),
        };
        let layer = DenseLayer::new(2, 1, vec![0.0, 1.0], None, Activation::Identity).unwrap();
        let p = ModelParameters::new(
            Network::Joint(Mlp::new(vec![layer]).unwrap()),
            FeatureEncoder::pretrained(1),
            FeatureEncoder::pretrained(1),
        )
        .unwrap();
        let query = vec![
            InteractionRecord::new(0, 3, 2, 3.0),
            InteractionRecord::new(0, 5, 2, 5.0),
            InteractionRecord::new(1, 1, 2, 1.0),
        ];
        let t = ShopTask {
            shop_id: 2,
            support: vec![],
            query,
            size_class: SizeClass::Large,
        };
        let m = rating_metrics(ShopModels::Shared(&p), &[t], &store, &Objective::SQUARED, &[1, 3]).unwrap();
        assert_eq!(m.keys().cloned().collect::<Vec<_>>(), vec!["mae", "ndcg@1", "ndcg@3"]);
        assert!(m["ndcg@3"].values.iter().all(|q| q.value == 1.0));
        assert_eq!(m["ndcg@1"].values.len(), 2);
        assert!(m["mae"].values.iter().all(|q| q.value == 0.0));
    }
}
