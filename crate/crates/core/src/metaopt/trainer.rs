use rand::seq::{index, SliceRandom};

use super::config::{MetaConfig, OuterOptimizer};
use super::maml::{meta_gradient, RegularizerKind, TaskBatch};
use crate::datapipe::{FeatureStore, InteractionRecord, ShopTask};
use crate::error::{Error, Result};
use crate::numcore::{adam_step, sgd_step, AdamState, ModelParameters};
use crate::rng;

/// Length of a meta-training run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Schedule {
    pub meta_steps: usize,
    /// Stop after this many consecutive epochs without a lower mean query
    /// loss. An epoch is one pass over all training tasks.
    pub patience: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepRecord {
    pub step: usize,
    pub epoch: usize,
    /// Mean query loss of the batch at the adapted parameters.
    pub loss: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetaOutcome {
    pub params: ModelParameters,
    pub trace: Vec<StepRecord>,
    pub stopped_early: bool,
}

const EPOCH_STREAM: u64 = 0x5eed_e90c;

/// Draws a fresh support/query split of a task's records for one step.
pub fn resample_split<'r>(
    task: &'r ShopTask,
    cfg: &MetaConfig,
    step: usize,
) -> Result<(Vec<&'r InteractionRecord>, Vec<&'r InteractionRecord>)> {
    let pool: Vec<&InteractionRecord> = task.records().collect();
    if pool.len() <= cfg.support_size {
        return Err(Error::Config(format!(
            "task {} has {} records, needs more than the support size {}",
            task.shop_id,
            pool.len(),
            cfg.support_size
        )));
    }
    let mut r = rng::stream2(cfg.seed, step as u64, task.shop_id);
    let mut chosen = index::sample(&mut r, pool.len(), cfg.support_size).into_vec();
    chosen.sort_unstable();
    let mut in_support = vec![false; pool.len()];
    for &c in &chosen {
        in_support[c] = true;
    }
    let support = chosen.iter().map(|&c| pool[c]).collect();
    let mut query: Vec<&InteractionRecord> = pool.iter().zip(&in_support).filter(|(_, s)| !**s).map(|(p, _)| *p).collect();
    if let Some(q) = cfg.query_size {
        if query.len() > q {
            let mut keep = index::sample(&mut r, query.len(), q).into_vec();
            keep.sort_unstable();
            query = keep.iter().map(|&k| query[k]).collect();
        }
    }
    Ok((support, query))
}

/// Meta-trains from `init` on `tasks` (first-order MAML, or fair training
/// when `regularizer` is set).
///
/// Each step takes the next `shop_batch_size` tasks of a per-epoch
/// permutation and redraws every task's support/query split. The outcome is
/// a pure function of the inputs and `cfg.seed`.
pub fn meta_train(
    init: &ModelParameters,
    tasks: &[ShopTask],
    store: &FeatureStore,
    cfg: &MetaConfig,
    schedule: Schedule,
    regularizer: Option<RegularizerKind>,
) -> Result<MetaOutcome> {
    cfg.validate()?;
    if tasks.is_empty() {
        return Err(Error::EmptyBatch("training tasks"));
    }
    let mut params = init.clone();
    let mut adam = AdamState::new(init);
    let mut trace = Vec::with_capacity(schedule.meta_steps);
    let mut order: Vec<usize> = Vec::new();
    let mut cursor = 0;
    let mut epoch = 0;
    let mut epoch_losses = Vec::new();
    let mut best = f64::INFINITY;
    let mut stale = 0;
    let mut stopped_early = false;
    for step in 0..schedule.meta_steps {
        if cursor >= order.len() {
            if !order.is_empty() {
                let mean = epoch_losses.iter().sum::<f64>() / epoch_losses.len() as f64;
                epoch_losses.clear();
                if mean < best {
                    best = mean;
                    stale = 0;
                } else {
                    stale += 1;
                }
                if schedule.patience.is_some_and(|p| stale >= p) {
                    stopped_early = true;
                    break;
                }
                epoch += 1;
            }
            order = (0..tasks.len()).collect();
            order.shuffle(&mut rng::stream2(cfg.seed, EPOCH_STREAM, epoch as u64));
            cursor = 0;
        }
        let end = (cursor + cfg.shop_batch_size).min(order.len());
        let picked = &order[cursor..end];
        cursor = end;

        let mut batch = Vec::with_capacity(picked.len());
        for &k in picked {
            let t = &tasks[k];
            let (s, q) = resample_split(t, cfg, step)?;
            batch.push(TaskBatch {
                shop_id: t.shop_id,
                support: store.examples(s)?,
                query: store.examples(q)?,
                size_class: t.size_class,
            });
        }
        let (loss, g) = meta_gradient(&params, &batch, cfg, regularizer)?;
        params = match cfg.outer_optimizer {
            OuterOptimizer::Sgd => sgd_step(&params, &g, cfg.beta)?,
            OuterOptimizer::Adam => {
                let (p, s) = adam_step(&adam, &params, &g, cfg.beta)?;
                adam = s;
                p
            }
        };
        if !params.all_finite() {
            return Err(Error::NonFinite {
                location: format!("meta parameters after step {step}"),
            });
        }
        epoch_losses.push(loss);
        trace.push(StepRecord { step, epoch, loss });
    }
    Ok(MetaOutcome {
        params,
        trace,
        stopped_early,
    })
}
