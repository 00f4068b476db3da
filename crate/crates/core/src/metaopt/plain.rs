//! Non-meta trainers: pooled mini-batch training (the Wide&Deep-style
//! comparator), single-shop training and the contrastive baseline.

use rand::seq::SliceRandom;

use super::config::OuterOptimizer;
use crate::error::{Error, Result};
use crate::models::{baseline_loss_gradient, BaselineParams, BaselineSample};
use crate::numcore::{adam_step, loss_gradient, sgd_step, AdamState, Example, ModelParameters, Objective};
use crate::rng;

#[derive(Debug, Clone, PartialEq)]
pub struct PlainConfig {
    pub stepsize: f64,
    pub epochs: usize,
    /// `None` trains full-batch.
    pub batch_size: Option<usize>,
    pub shuffle: bool,
    pub objective: Objective,
    pub optimizer: OuterOptimizer,
    pub seed: u64,
}

impl Default for PlainConfig {
    fn default() -> Self {
        Self {
            stepsize: 1e-3,
            epochs: 10,
            batch_size: Some(256),
            shuffle: true,
            objective: Objective::SQUARED,
            optimizer: OuterOptimizer::Adam,
            seed: 0,
        }
    }
}

impl PlainConfig {
    fn validate(&self) -> Result<()> {
        if !(self.stepsize >= 0.0 && self.stepsize.is_finite()) {
            return Err(Error::Config("stepsize must be non-negative".into()));
        }
        if self.batch_size == Some(0) {
            return Err(Error::Config("batch_size must be positive".into()));
        }
        Ok(())
    }
}

/// Trained parameters with the mean batch loss of every epoch.
#[derive(Debug, Clone, PartialEq)]
pub struct PlainOutcome<P> {
    pub params: P,
    pub epoch_losses: Vec<f64>,
}

/// Batches of indices for one epoch; reshuffled per epoch when enabled.
fn epoch_batches(n: usize, cfg: &PlainConfig, epoch: usize) -> Vec<Vec<usize>> {
    let mut idx: Vec<usize> = (0..n).collect();
    if cfg.shuffle {
        idx.shuffle(&mut rng::stream(cfg.seed, epoch as u64));
    }
    let size = cfg.batch_size.unwrap_or(n).max(1);
    idx.chunks(size).map(<[usize]>::to_vec).collect()
}

/// Mini-batch training of a scoring model from `init` over `data`.
pub fn plain_train(init: &ModelParameters, data: &[Example<'_>], cfg: &PlainConfig) -> Result<PlainOutcome<ModelParameters>> {
    cfg.validate()?;
    if data.is_empty() {
        return Err(Error::EmptyBatch("training data"));
    }
    let mut params = init.clone();
    let mut adam = AdamState::new(init);
    let mut epoch_losses = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        let batches = epoch_batches(data.len(), cfg, epoch);
        let mut total = 0.0;
        for b in &batches {
            let batch: Vec<Example> = b.iter().map(|&k| data[k]).collect();
            let (loss, g) = loss_gradient(&params, &batch, &cfg.objective)?;
            total += loss;
            params = match cfg.optimizer {
                OuterOptimizer::Sgd => sgd_step(&params, &g, cfg.stepsize)?,
                OuterOptimizer::Adam => {
                    let (p, s) = adam_step(&adam, &params, &g, cfg.stepsize)?;
                    adam = s;
                    p
                }
            };
        }
        epoch_losses.push(total / batches.len() as f64);
    }
    Ok(PlainOutcome { params, epoch_losses })
}

/// Pooled training over every shop's records.
pub fn nonmeta_train(init: &ModelParameters, data: &[Example<'_>], cfg: &PlainConfig) -> Result<PlainOutcome<ModelParameters>> {
    plain_train(init, data, cfg)
}

/// Training on a single shop's records only, with no transfer from other
/// shops.
pub fn one_shop_train(init: &ModelParameters, shop_data: &[Example<'_>], cfg: &PlainConfig) -> Result<PlainOutcome<ModelParameters>> {
    plain_train(init, shop_data, cfg)
}

/// Mini-batch training of the contrastive baseline. The epoch loss is the
/// per-sample mean.
pub fn baseline_train(
    init: &BaselineParams,
    samples: &[BaselineSample<'_>],
    cfg: &PlainConfig,
) -> Result<PlainOutcome<BaselineParams>> {
    cfg.validate()?;
    if samples.is_empty() {
        return Err(Error::EmptyBatch("baseline samples"));
    }
    let mut params = init.clone();
    let mut adam = AdamState::with_len(init.values().count());
    let mut epoch_losses = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        let batches = epoch_batches(samples.len(), cfg, epoch);
        let mut total = 0.0;
        for b in &batches {
            let batch: Vec<BaselineSample> = b.iter().map(|&k| samples[k].clone()).collect();
            let (loss, mut g) = baseline_loss_gradient(&params, &batch)?;
            let scale = 1.0 / batch.len() as f64;
            for v in g.values_mut() {
                *v *= scale;
            }
            total += loss;
            match cfg.optimizer {
                OuterOptimizer::Sgd => {
                    for (p, d) in params.values_mut().zip(g.values()) {
                        *p -= cfg.stepsize * d;
                    }
                }
                OuterOptimizer::Adam => {
                    crate::numcore::adam_apply(&mut adam, params.values_mut(), g.values(), cfg.stepsize)
                }
            }
            if !params.values().all(|v| v.is_finite()) {
                return Err(Error::NonFinite {
                    location: "baseline parameters".into(),
                });
            }
        }
        epoch_losses.push(total / samples.len() as f64);
    }
    Ok(PlainOutcome { params, epoch_losses })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{FeatureEncoder, FeatureInput};
    use crate::numcore::{Activation, DenseLayer, LossKind, Mlp, ModelSpec, Network, Variant};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn scalar(theta: f64) -> ModelParameters {
        let layer = DenseLayer::new(1, 1, vec![theta], None, Activation::Identity).unwrap();
        ModelParameters::new(
            Network::Joint(Mlp::new(vec![layer]).unwrap()),
            FeatureEncoder::pretrained(1),
            FeatureEncoder::pretrained(0),
        )
        .unwrap()
    }

    fn full_batch_sgd(stepsize: f64, epochs: usize) -> PlainConfig {
        PlainConfig {
            stepsize,
            epochs,
            batch_size: None,
            shuffle: false,
            objective: Objective::SQUARED,
            optimizer: OuterOptimizer::Sgd,
            seed: 0,
        }
    }

    #[test]
    fn one_full_batch_epoch_is_one_sgd_step() {
        let xs: Vec<FeatureInput> = [1.0, -0.5, 2.0].iter().map(|&v| FeatureInput::Dense(vec![v])).collect();
        let e = FeatureInput::Dense(vec![]);
        let data: Vec<Example> = xs
            .iter()
            .zip([1.0, 0.2, -1.0])
            .map(|(x, y)| Example { user: x, item: &e, label: y })
            .collect();
        let p = scalar(0.3);
        let (_, g) = loss_gradient(&p, &data, &Objective::SQUARED).unwrap();
        let want = sgd_step(&p, &g, 0.1).unwrap();
        assert_eq!(one_shop_train(&p, &data, &full_batch_sgd(0.1, 1)).unwrap().params, want);
        assert_eq!(nonmeta_train(&p, &data, &full_batch_sgd(0.1, 1)).unwrap().params, want);
    }

    #[test]
    fn zero_epochs_returns_init() {
        let x = FeatureInput::Dense(vec![1.0]);
        let e = FeatureInput::Dense(vec![]);
        let data = [Example { user: &x, item: &e, label: 1.0 }];
        let p = scalar(0.3);
        let out = one_shop_train(&p, &data, &full_batch_sgd(0.1, 0)).unwrap();
        assert_eq!(out.params, p);
        assert!(out.epoch_losses.is_empty());
    }

    #[test]
    fn empty_data_rejected() {
        assert!(matches!(plain_train(&scalar(0.0), &[], &full_batch_sgd(0.1, 1)), Err(Error::EmptyBatch(_))));
    }

    fn synthetic_shop(seed: u64) -> (ModelParameters, Vec<(FeatureInput, FeatureInput, f64)>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let spec = ModelSpec {
            variant: Variant::TwoTower,
            hidden: vec![8, 4],
            bias: true,
        };
        let p = ModelParameters::init(&spec, FeatureEncoder::pretrained(4), FeatureEncoder::pretrained(4), &mut rng).unwrap();
        let data = (0..60)
            .map(|_| {
                let u: Vec<f64> = (0..4).map(|_| rng.random_range(-1.0..1.0)).collect();
                let i: Vec<f64> = (0..4).map(|_| rng.random_range(-1.0..1.0)).collect();
                let y = f64::from(u.iter().zip(&i).map(|(a, b)| a * b).sum::<f64>() > 0.0);
                (FeatureInput::Dense(u), FeatureInput::Dense(i), y)
            })
            .collect();
        (p, data)
    }

    #[test]
    fn full_batch_loss_decreases_monotonically() {
        let (p, data) = synthetic_shop(3);
        let ex: Vec<Example> = data.iter().map(|(u, i, y)| Example { user: u, item: i, label: *y }).collect();
        let cfg = PlainConfig {
            objective: Objective::for_labels(LossKind::BinaryCrossEntropy, true),
            ..full_batch_sgd(0.05, 5)
        };
        let t = one_shop_train(&p, &ex, &cfg).unwrap().epoch_losses;
        assert!(t.windows(2).all(|w| w[1] < w[0]), "{t:?}");
    }

    #[test]
    fn pooled_training_is_reproducible_and_lowers_loss() {
        let (p, data) = synthetic_shop(4);
        let ex: Vec<Example> = data.iter().map(|(u, i, y)| Example { user: u, item: i, label: *y }).collect();
        let cfg = PlainConfig {
            stepsize: 0.01,
            epochs: 30,
            batch_size: Some(8),
            objective: Objective::for_labels(LossKind::BinaryCrossEntropy, true),
            ..Default::default()
        };
        let a = nonmeta_train(&p, &ex, &cfg).unwrap();
        assert_eq!(a, nonmeta_train(&p, &ex, &cfg).unwrap());
        assert!(a.epoch_losses.last().unwrap() < &a.epoch_losses[0]);
        let unshuffled = PlainConfig { shuffle: false, ..cfg };
        assert_eq!(nonmeta_train(&p, &ex, &unshuffled).unwrap(), nonmeta_train(&p, &ex, &unshuffled).unwrap());
    }

    #[test]
    fn baseline_training_lowers_contrastive_loss() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let b = BaselineParams::init(3, &[6, 4], 1.0, 1.0, &mut rng).unwrap();
        let items: Vec<FeatureInput> = (0..12)
            .map(|_| FeatureInput::Dense((0..3).map(|_| rng.random_range(-1.0..1.0)).collect()))
            .collect();
        let h1: Vec<&FeatureInput> = items[..3].iter().collect();
        let h2: Vec<&FeatureInput> = items[3..6].iter().collect();
        let mut samples = Vec::new();
        for k in 6..12 {
            samples.push(BaselineSample { history: &h1, item: &items[k], positive: k < 9 });
            samples.push(BaselineSample { history: &h2, item: &items[k], positive: k >= 9 });
        }
        let cfg = PlainConfig {
            stepsize: 0.01,
            epochs: 40,
            batch_size: Some(4),
            ..Default::default()
        };
        let out = baseline_train(&b, &samples, &cfg).unwrap();
        assert!(out.epoch_losses.last().unwrap() < &out.epoch_losses[0], "{:?}", out.epoch_losses);
    }
}
