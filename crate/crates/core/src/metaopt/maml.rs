use std::collections::BTreeMap;

use rayon::prelude::*;

use super::config::MetaConfig;
use crate::datapipe::SizeClass;
use crate::error::{Error, Result};
use crate::numcore::{output_gradient, sgd_step, Example, GradientSet, ModelParameters, Objective};

/// A task resolved to feature space.
#[derive(Debug, Clone)]
pub struct TaskBatch<'a> {
    pub shop_id: u64,
    pub support: Vec<Example<'a>>,
    pub query: Vec<Example<'a>>,
    pub size_class: SizeClass,
}

/// Fairness penalty on the mean linked score of a task's pairs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RegularizerKind {
    /// `1 - mean(score)` on small-shop tasks.
    OptionI,
    /// `mean(score)` on large-shop tasks.
    OptionII,
}

impl RegularizerKind {
    pub fn applies_to(self, class: SizeClass) -> bool {
        matches!(
            (self, class),
            (RegularizerKind::OptionI, SizeClass::Small) | (RegularizerKind::OptionII, SizeClass::Large)
        )
    }

    pub fn name(self) -> &'static str {
        match self {
            RegularizerKind::OptionI => "option1",
            RegularizerKind::OptionII => "option2",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        match s {
            "option1" | "I" | "i" => Some(RegularizerKind::OptionI),
            "option2" | "II" | "ii" => Some(RegularizerKind::OptionII),
            _ => None,
        }
    }

    /// Value and per-score derivative.
    fn value_and_grad(self, scores: &[f64]) -> Result<(f64, f64)> {
        let n = scores.len() as f64;
        match self {
            RegularizerKind::OptionI => Ok((regularizer_option1(scores)?, -1.0 / n)),
            RegularizerKind::OptionII => Ok((regularizer_option2(scores)?, 1.0 / n)),
        }
    }
}

fn mean(scores: &[f64]) -> Result<f64> {
    if scores.is_empty() {
        return Err(Error::EmptyBatch("regularizer over zero scores"));
    }
    Ok(scores.iter().sum::<f64>() / scores.len() as f64)
}

pub fn regularizer_option1(scores: &[f64]) -> Result<f64> {
    Ok(1.0 - mean(scores)?)
}

pub fn regularizer_option2(scores: &[f64]) -> Result<f64> {
    mean(scores)
}

/// Task loss, optionally plus `gamma` times a regularizer, and its gradient.
///
/// With no regularizer (or `gamma == 0`) this is exactly the objective's
/// own loss gradient.
pub fn task_gradient(
    params: &ModelParameters,
    batch: &[Example<'_>],
    objective: &Objective,
    penalty: Option<(RegularizerKind, f64)>,
) -> Result<(f64, GradientSet)> {
    output_gradient(params, batch, objective.link, |p, y| {
        let (loss, mut grad) = objective.value_and_grad(p, y)?;
        match penalty {
            Some((kind, gamma)) if gamma != 0.0 => {
                let (r, dr) = kind.value_and_grad(p)?;
                for g in &mut grad {
                    *g += gamma * dr;
                }
                Ok((loss + gamma * r, grad))
            }
            _ => Ok((loss, grad)),
        }
    })
}

fn penalty_for(cfg: &MetaConfig, reg: Option<RegularizerKind>, class: SizeClass) -> Option<(RegularizerKind, f64)> {
    reg.filter(|k| k.applies_to(class)).map(|k| (k, cfg.gamma))
}

/// `K` gradient steps of size `alpha` on the support set, starting at
/// `theta`. `penalty` adds a weighted regularizer to every step.
pub fn local_adapt_with(
    theta: &ModelParameters,
    support: &[Example<'_>],
    cfg: &MetaConfig,
    penalty: Option<(RegularizerKind, f64)>,
) -> Result<ModelParameters> {
    if support.is_empty() {
        return Err(Error::EmptyBatch("support set"));
    }
    let mut p = theta.clone();
    for _ in 0..cfg.local_steps {
        let (_, g) = task_gradient(&p, support, &cfg.objective, penalty)?;
        p = sgd_step(&p, &g, cfg.alpha)?;
    }
    Ok(p)
}

/// Plain local adaptation (no regularizer).
pub fn local_adapt(theta: &ModelParameters, support: &[Example<'_>], cfg: &MetaConfig) -> Result<ModelParameters> {
    local_adapt_with(theta, support, cfg, None)
}

/// Query loss and first-order outer gradient of one task.
pub fn task_meta_gradient(
    theta: &ModelParameters,
    task: &TaskBatch<'_>,
    cfg: &MetaConfig,
    reg: Option<RegularizerKind>,
) -> Result<(f64, GradientSet)> {
    if task.query.is_empty() {
        return Err(Error::EmptyBatch("query set"));
    }
    if reg.is_some() && task.size_class == SizeClass::New {
        return Err(Error::Config(format!("task {} is a new shop and cannot be trained on", task.shop_id)));
    }
    let penalty = penalty_for(cfg, reg, task.size_class);
    let adapted = local_adapt_with(theta, &task.support, cfg, penalty)?;
    task_gradient(&adapted, &task.query, &cfg.objective, penalty)
}

/// Sum of per-task outer gradients and mean query loss.
///
/// Tasks are processed concurrently; the sum is always accumulated in
/// ascending `shop_id` order (stable for equal ids).
pub fn meta_gradient(
    theta: &ModelParameters,
    tasks: &[TaskBatch<'_>],
    cfg: &MetaConfig,
    reg: Option<RegularizerKind>,
) -> Result<(f64, GradientSet)> {
    if tasks.is_empty() {
        return Err(Error::EmptyBatch("task batch"));
    }
    let mut order: Vec<usize> = (0..tasks.len()).collect();
    order.sort_by_key(|&k| tasks[k].shop_id);
    let parts = order
        .par_iter()
        .map(|&k| task_meta_gradient(theta, &tasks[k], cfg, reg))
        .collect::<Vec<_>>();
    let mut total = GradientSet::zeros_like(theta);
    let mut loss = 0.0;
    for part in parts {
        let (l, g) = part?;
        loss += l;
        total.add_assign(&g)?;
    }
    Ok((loss / tasks.len() as f64, total))
}

/// One first-order MAML step with an SGD outer update from `theta`.
pub fn meta_train_step(theta: &ModelParameters, tasks: &[TaskBatch<'_>], cfg: &MetaConfig) -> Result<ModelParameters> {
    let (_, g) = meta_gradient(theta, tasks, cfg, None)?;
    sgd_step(theta, &g, cfg.beta)
}

/// One fair meta-training step: tasks of the class selected by `kind`
/// carry `gamma` times the regularizer in their local and global terms.
pub fn fmst_train_step(
    theta: &ModelParameters,
    tasks: &[TaskBatch<'_>],
    cfg: &MetaConfig,
    kind: RegularizerKind,
) -> Result<ModelParameters> {
    let (_, g) = meta_gradient(theta, tasks, cfg, Some(kind))?;
    sgd_step(theta, &g, cfg.beta)
}

/// Independent adaptation of the shared parameters to each shop.
pub fn meta_inference(
    theta: &ModelParameters,
    shops: &[TaskBatch<'_>],
    cfg: &MetaConfig,
) -> Result<BTreeMap<u64, ModelParameters>> {
    let adapted = shops
        .par_iter()
        .map(|s| local_adapt(theta, &s.support, cfg).map(|p| (s.shop_id, p)))
        .collect::<Result<Vec<_>>>()?;
    let mut out = BTreeMap::new();
    for (id, p) in adapted {
        if out.insert(id, p).is_some() {
            return Err(Error::Config(format!("shop {id} listed twice for inference")));
        }
    }
    Ok(out)
}
