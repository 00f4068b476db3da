//! Distance-based production baseline.
//!
//! Items are mapped from side features by an MLP; a user is the mean of the
//! mapped items they purchased. Training minimizes the Euclidean distance of
//! positive pairs plus a margin hinge on negative pairs.

use rand::Rng;

use crate::error::{Error, Result};
use crate::models::encoder::FeatureInput;
use crate::numcore::{Activation, Mlp, Trace};

#[derive(Debug, Clone, PartialEq)]
pub struct BaselineParams {
    pub item_mapper: Mlp,
    /// Hinge margin `m_d` for negative pairs.
    pub margin: f64,
    /// Weight `λ` of the negative term.
    pub neg_weight: f64,
}

impl BaselineParams {
    pub fn new(item_mapper: Mlp, margin: f64, neg_weight: f64) -> Result<Self> {
        if margin <= 0.0 || !margin.is_finite() {
            return Err(Error::Config(format!("baseline margin must be positive, got {margin}")));
        }
        if neg_weight <= 0.0 || !neg_weight.is_finite() {
            return Err(Error::Config(format!("baseline negative weight must be positive, got {neg_weight}")));
        }
        Ok(Self {
            item_mapper,
            margin,
            neg_weight,
        })
    }

    pub fn init<R: Rng + ?Sized>(item_dim: usize, hidden: &[usize], margin: f64, neg_weight: f64, rng: &mut R) -> Result<Self> {
        let mut dims = vec![item_dim];
        dims.extend(hidden);
        let mapper = Mlp::init(&dims, true, Activation::Relu, Activation::Identity, rng)?;
        Self::new(mapper, margin, neg_weight)
    }

    pub fn map_item(&self, item: &FeatureInput) -> Result<Vec<f64>> {
        self.item_mapper.forward(dense(item)?)
    }

    pub fn zeros_like(&self) -> Self {
        Self {
            item_mapper: self.item_mapper.zeros_like(),
            margin: self.margin,
            neg_weight: self.neg_weight,
        }
    }

    pub fn values(&self) -> impl Iterator<Item = &f64> {
        self.item_mapper.values()
    }

    pub fn values_mut(&mut self) -> impl Iterator<Item = &mut f64> {
        self.item_mapper.values_mut()
    }
}

fn dense(input: &FeatureInput) -> Result<&[f64]> {
    match input {
        FeatureInput::Dense(v) => Ok(v),
        FeatureInput::Categorical(_) => Err(Error::Config("baseline item mapper takes dense features".into())),
    }
}

/// Mean of the mapped representations of the purchased items.
pub fn baseline_user_representation(params: &BaselineParams, purchased_item_feats: &[&FeatureInput]) -> Result<Vec<f64>> {
    if purchased_item_feats.is_empty() {
        return Err(Error::ColdUser);
    }
    let mut acc = vec![0.0; params.item_mapper.out_dim()];
    for item in purchased_item_feats {
        for (a, v) in acc.iter_mut().zip(params.map_item(item)?) {
            *a += v;
        }
    }
    let n = purchased_item_feats.len() as f64;
    acc.iter_mut().for_each(|a| *a /= n);
    Ok(acc)
}

fn l2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// `Σ_pos ‖u - f(x)‖ + λ Σ_neg max(0, m - ‖u - f(x)‖)` with fixed user representations.
pub fn baseline_contrastive_loss(
    params: &BaselineParams,
    positives: &[(&[f64], &FeatureInput)],
    negatives: &[(&[f64], &FeatureInput)],
) -> Result<f64> {
    if positives.is_empty() && negatives.is_empty() {
        return Err(Error::EmptyBatch("contrastive loss needs at least one pair"));
    }
    let mut total = 0.0;
    for (u, x) in positives {
        let fx = params.map_item(x)?;
        if fx.len() != u.len() {
            return Err(Error::shape("user representation", fx.len(), u.len()));
        }
        total += l2(u, &fx);
    }
    for (u, x) in negatives {
        let fx = params.map_item(x)?;
        if fx.len() != u.len() {
            return Err(Error::shape("user representation", fx.len(), u.len()));
        }
        total += params.neg_weight * (params.margin - l2(u, &fx)).max(0.0);
    }
    Ok(total)
}

/// One training pair for the baseline: the user's purchase history (whose
/// mean forms the user representation), the candidate item and its polarity.
#[derive(Debug, Clone, Copy)]
pub struct BaselineSample<'a> {
    pub history: &'a [&'a FeatureInput],
    pub item: &'a FeatureInput,
    pub positive: bool,
}

/// Contrastive objective summed over `samples` and its gradient with respect
/// to the item mapper, differentiating through the user aggregation as well.
pub fn baseline_loss_gradient(params: &BaselineParams, samples: &[BaselineSample<'_>]) -> Result<(f64, BaselineParams)> {
    if samples.is_empty() {
        return Err(Error::EmptyBatch("baseline gradient over zero samples"));
    }
    let mapper = &params.item_mapper;
    let mut grads = params.zeros_like();
    let mut total = 0.0;
    for s in samples {
        if s.history.is_empty() {
            return Err(Error::ColdUser);
        }
        let hist: Vec<Trace> = s
            .history
            .iter()
            .map(|h| mapper.forward_trace(dense(h)?))
            .collect::<Result<_>>()?;
        let n = hist.len() as f64;
        let mut u = vec![0.0; mapper.out_dim()];
        for t in &hist {
            for (a, v) in u.iter_mut().zip(t.output()) {
                *a += v / n;
            }
        }
        let it = mapper.forward_trace(dense(s.item)?)?;
        let diff: Vec<f64> = u.iter().zip(it.output()).map(|(a, b)| a - b).collect();
        let dist = diff.iter().map(|d| d * d).sum::<f64>().sqrt();
        // Derivative of the sample loss with respect to `diff`.
        let coef = if s.positive {
            total += dist;
            if dist > 0.0 {
                1.0 / dist
            } else {
                0.0
            }
        } else if dist < params.margin {
            total += params.neg_weight * (params.margin - dist);
            if dist > 0.0 {
                -params.neg_weight / dist
            } else {
                0.0
            }
        } else {
            0.0
        };
        if coef == 0.0 {
            continue;
        }
        let d_diff: Vec<f64> = diff.iter().map(|d| coef * d).collect();
        let d_hist: Vec<f64> = d_diff.iter().map(|d| d / n).collect();
        for t in &hist {
            mapper.backward(t, &d_hist, &mut grads.item_mapper);
        }
        let d_item: Vec<f64> = d_diff.iter().map(|d| -d).collect();
        mapper.backward(&it, &d_item, &mut grads.item_mapper);
    }
    Ok((total, grads))
}
