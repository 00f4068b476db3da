//! The model roster and a uniform "larger score = stronger recommendation"
//! scoring interface.
//!
//! | kind       | parameters                   | training                 |
//! |------------|------------------------------|--------------------------|
//! | `MeSh`     | two towers, dot product      | meta-training            |
//! | `MeShI`    | joint MLP over `[user; item]`| meta-training            |
//! | `WideDeep` | joint MLP over `[user; item]`| pooled mini-batch SGD    |
//! | `Baseline` | item mapper, mean-of-history | contrastive loss         |
//!
//! An item-task meta-learner is not a separate model: it is `MeShI` trained
//! with [`TaskUnit::Item`](crate::datapipe::TaskUnit).

pub mod baseline;
pub mod checkpoint;
pub mod encoder;

pub use baseline::{
    baseline_contrastive_loss, baseline_loss_gradient, baseline_user_representation, BaselineParams, BaselineSample,
};
pub use checkpoint::{read_checkpoint, write_checkpoint};
pub use encoder::{encode_item, encode_user, EmbeddingField, EncoderMode, FeatureEncoder, FeatureInput};

use crate::error::{Error, Result};
use crate::numcore::{ModelParameters, Variant};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ModelKind {
    MeSh,
    MeShI,
    WideDeep,
    Baseline,
}

impl ModelKind {
    pub fn name(self) -> &'static str {
        match self {
            ModelKind::MeSh => "mesh",
            ModelKind::MeShI => "mesh_i",
            ModelKind::WideDeep => "wide_deep",
            ModelKind::Baseline => "baseline",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        match s {
            "mesh" => Some(ModelKind::MeSh),
            "mesh_i" => Some(ModelKind::MeShI),
            "wide_deep" => Some(ModelKind::WideDeep),
            "baseline" => Some(ModelKind::Baseline),
            _ => None,
        }
    }

    /// Network variant backing this kind; `None` for the baseline.
    pub fn variant(self) -> Option<Variant> {
        match self {
            ModelKind::MeSh => Some(Variant::TwoTower),
            ModelKind::MeShI | ModelKind::WideDeep => Some(Variant::JointMlp),
            ModelKind::Baseline => None,
        }
    }
}

/// Trained parameters of any roster entry.
#[derive(Debug, Clone, PartialEq)]
pub enum TrainedModel {
    Scoring(ModelParameters),
    Baseline(BaselineParams),
}

impl TrainedModel {
    pub fn scoring(&self) -> Option<&ModelParameters> {
        match self {
            TrainedModel::Scoring(p) => Some(p),
            TrainedModel::Baseline(_) => None,
        }
    }
}

/// Scores one (user, item) pair with the model of the given kind.
///
/// For `Baseline`, `user_feat` must be the user's aggregated representation
/// (see [`baseline_user_representation`]) and the score is the negated
/// Euclidean distance, so identical representations give the maximum 0.
/// Other kinds return the raw network score.
pub fn predict(kind: ModelKind, params: &TrainedModel, user_feat: &FeatureInput, item_feat: &FeatureInput) -> Result<f64> {
    match (kind, params) {
        (ModelKind::Baseline, TrainedModel::Baseline(b)) => {
            let FeatureInput::Dense(u) = user_feat else {
                return Err(Error::Config("baseline user input must be a dense representation".into()));
            };
            let fx = b.map_item(item_feat)?;
            if fx.len() != u.len() {
                return Err(Error::shape("user representation", fx.len(), u.len()));
            }
            Ok(-u.iter().zip(&fx).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt())
        }
        (k, TrainedModel::Scoring(p)) if k.variant() == Some(p.variant()) => p.score(user_feat, item_feat),
        _ => Err(Error::Config(format!("model kind `{}` does not match the parameters", kind.name()))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numcore::{score_joint, score_two_tower, ModelSpec};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn dense(rng: &mut ChaCha8Rng, n: usize) -> FeatureInput {
        FeatureInput::Dense((0..n).map(|_| rng.random_range(-1.0..1.0)).collect())
    }

    fn model(variant: Variant, seed: u64) -> ModelParameters {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let spec = ModelSpec {
            variant,
            hidden: vec![4, 3],
            bias: true,
        };
        ModelParameters::init(&spec, FeatureEncoder::pretrained(3), FeatureEncoder::pretrained(2), &mut rng).unwrap()
    }

    #[test]
    fn baseline_identical_reps_score_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let b = BaselineParams::init(2, &[3], 1.0, 1.0, &mut rng).unwrap();
        let item = FeatureInput::Dense(vec![0.3, 0.9]);
        let u = FeatureInput::Dense(b.map_item(&item).unwrap());
        let s = predict(ModelKind::Baseline, &TrainedModel::Baseline(b), &u, &item).unwrap();
        assert_eq!(s, 0.0);
    }

    #[test]
    fn dispatch_is_transparent_over_seeded_inputs() {
        let tt = model(Variant::TwoTower, 2);
        let jm = model(Variant::JointMlp, 3);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..50 {
            let u = dense(&mut rng, 3);
            let i = dense(&mut rng, 2);
            assert_eq!(
                predict(ModelKind::MeSh, &TrainedModel::Scoring(tt.clone()), &u, &i).unwrap(),
                score_two_tower(&tt, &u, &i).unwrap()
            );
            for k in [ModelKind::MeShI, ModelKind::WideDeep] {
                assert_eq!(
                    predict(k, &TrainedModel::Scoring(jm.clone()), &u, &i).unwrap(),
                    score_joint(&jm, &u, &i).unwrap()
                );
            }
        }
    }

    #[test]
    fn kind_variant_mismatch_is_error() {
        let tt = TrainedModel::Scoring(model(Variant::TwoTower, 2));
        let u = FeatureInput::Dense(vec![0.0; 3]);
        let i = FeatureInput::Dense(vec![0.0; 2]);
        assert!(predict(ModelKind::MeShI, &tt, &u, &i).is_err());
        assert!(predict(ModelKind::Baseline, &tt, &u, &i).is_err());
    }

    #[test]
    fn baseline_score_increases_as_item_moves_closer() {
        // identity mapper so moving the input moves the representation
        let layer = crate::numcore::DenseLayer::new(
            2,
            2,
            vec![1.0, 0.0, 0.0, 1.0],
            None,
            crate::numcore::Activation::Identity,
        )
        .unwrap();
        let b = TrainedModel::Baseline(BaselineParams::new(crate::numcore::Mlp::new(vec![layer]).unwrap(), 1.0, 1.0).unwrap());
        let u = FeatureInput::Dense(vec![0.0, 0.0]);
        let mut last = f64::NEG_INFINITY;
        for r in [4.0, 2.0, 1.0, 0.5, 0.1] {
            let s = predict(ModelKind::Baseline, &b, &u, &FeatureInput::Dense(vec![r, r])).unwrap();
            assert!(s > last);
            last = s;
        }
    }
}
