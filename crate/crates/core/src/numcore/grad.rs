use super::layer::{sigmoid, Trace};
use super::loss::{Link, Objective};
use super::params::{dot, GradientSet, ModelParameters, Network};
use crate::error::{Error, Result};
use crate::models::encoder::FeatureInput;

/// One labelled (user, item) pair with its raw features.
#[derive(Debug, Clone, Copy)]
pub struct Example<'a> {
    pub user: &'a FeatureInput,
    pub item: &'a FeatureInput,
    pub label: f64,
}

enum Cache {
    TwoTower { user: Trace, item: Trace },
    Joint { trace: Trace, user_len: usize },
}

struct Forward {
    cache: Cache,
    score: f64,
    prediction: f64,
}

fn forward(params: &ModelParameters, ex: &Example<'_>, link: Link) -> Result<Forward> {
    let (cache, score) = match &params.network {
        Network::TwoTower { user, item } => {
            let ut = user.forward_trace(&params.user_encoder.encode(ex.user)?)?;
            let it = item.forward_trace(&params.item_encoder.encode(ex.item)?)?;
            let s = dot(ut.output(), it.output());
            (Cache::TwoTower { user: ut, item: it }, s)
        }
        Network::Joint(mlp) => {
            let mut x = params.user_encoder.encode(ex.user)?;
            let user_len = x.len();
            params.item_encoder.encode_into(ex.item, &mut x)?;
            let trace = mlp.forward_trace(&x)?;
            let s = trace.output()[0];
            (Cache::Joint { trace, user_len }, s)
        }
    };
    if !score.is_finite() {
        return Err(Error::NonFinite {
            location: "model score".into(),
        });
    }
    let prediction = match link {
        Link::Identity => score,
        Link::Sigmoid => sigmoid(score),
    };
    Ok(Forward {
        cache,
        score,
        prediction,
    })
}

fn backward(params: &ModelParameters, ex: &Example<'_>, fwd: &Forward, d_score: f64, grads: &mut ModelParameters) {
    match (&params.network, &fwd.cache, &mut grads.network) {
        (Network::TwoTower { user, item }, Cache::TwoTower { user: ut, item: it }, Network::TwoTower { user: gu, item: gi }) => {
            let du: Vec<f64> = it.output().iter().map(|v| v * d_score).collect();
            let di: Vec<f64> = ut.output().iter().map(|v| v * d_score).collect();
            let dxu = user.backward(ut, &du, gu);
            let dxi = item.backward(it, &di, gi);
            params.user_encoder.accumulate_grad(ex.user, &dxu, &mut grads.user_encoder);
            params.item_encoder.accumulate_grad(ex.item, &dxi, &mut grads.item_encoder);
        }
        (Network::Joint(mlp), Cache::Joint { trace, user_len }, Network::Joint(gm)) => {
            let dx = mlp.backward(trace, &[d_score], gm);
            params.user_encoder.accumulate_grad(ex.user, &dx[..*user_len], &mut grads.user_encoder);
            params.item_encoder.accumulate_grad(ex.item, &dx[*user_len..], &mut grads.item_encoder);
        }
        _ => unreachable!("gradient buffer shaped like params"),
    }
}

/// Linked predictions for a batch.
pub fn predict_batch(params: &ModelParameters, batch: &[Example<'_>], link: Link) -> Result<Vec<f64>> {
    batch
        .iter()
        .map(|ex| forward(params, ex, link).map(|f| f.prediction))
        .collect()
}

/// Gradient of an arbitrary scalar function of the batch predictions.
///
/// `head` receives the linked predictions and the labels and returns the
/// scalar value together with its derivative per prediction. The returned
/// gradient is the exact chain-rule derivative through link, networks and
/// embedding tables.
pub fn output_gradient<F>(params: &ModelParameters, batch: &[Example<'_>], link: Link, head: F) -> Result<(f64, GradientSet)>
where
    F: FnOnce(&[f64], &[f64]) -> Result<(f64, Vec<f64>)>,
{
    if batch.is_empty() {
        return Err(Error::EmptyBatch("gradient over zero examples"));
    }
    let fwds = batch
        .iter()
        .map(|ex| forward(params, ex, link))
        .collect::<Result<Vec<_>>>()?;
    let preds: Vec<f64> = fwds.iter().map(|f| f.prediction).collect();
    let labels: Vec<f64> = batch.iter().map(|e| e.label).collect();
    let (value, d_pred) = head(&preds, &labels)?;
    let mut grads = params.zeros_like();
    for ((ex, fwd), dp) in batch.iter().zip(&fwds).zip(&d_pred) {
        let d_score = match link {
            Link::Identity => *dp,
            Link::Sigmoid => {
                let s = sigmoid(fwd.score);
                dp * s * (1.0 - s)
            }
        };
        if d_score != 0.0 {
            backward(params, ex, fwd, d_score, &mut grads);
        }
    }
    let grads = GradientSet(grads);
    if !value.is_finite() || !grads.all_finite() {
        return Err(Error::NonFinite {
            location: "loss gradient".into(),
        });
    }
    Ok((value, grads))
}

/// Mean loss over `batch` and its analytic gradient.
pub fn loss_gradient(params: &ModelParameters, batch: &[Example<'_>], objective: &Objective) -> Result<(f64, GradientSet)> {
    output_gradient(params, batch, objective.link, |p, y| objective.value_and_grad(p, y))
}

/// Mean loss without the gradient.
pub fn loss_value(params: &ModelParameters, batch: &[Example<'_>], objective: &Objective) -> Result<f64> {
    if batch.is_empty() {
        return Err(Error::EmptyBatch("loss over zero examples"));
    }
    let preds = predict_batch(params, batch, objective.link)?;
    let labels: Vec<f64> = batch.iter().map(|e| e.label).collect();
    Ok(objective.value_and_grad(&preds, &labels)?.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::encoder::FeatureEncoder;
    use crate::numcore::layer::{Activation, DenseLayer, Mlp};
    use crate::numcore::loss::LossKind;
    use crate::numcore::params::{ModelSpec, Variant};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// ŷ = θ·x with a single bias-free weight.
    fn scalar_model(theta: f64) -> ModelParameters {
        let layer = DenseLayer::new(1, 1, vec![theta], None, Activation::Identity).unwrap();
        ModelParameters::new(
            Network::Joint(Mlp::new(vec![layer]).unwrap()),
            FeatureEncoder::pretrained(1),
            FeatureEncoder::pretrained(0),
        )
        .unwrap()
    }

    #[test]
    fn scalar_model_gradient() {
        let p = scalar_model(0.0);
        let u = FeatureInput::Dense(vec![1.0]);
        let i = FeatureInput::Dense(vec![]);
        let batch = [Example {
            user: &u,
            item: &i,
            label: 1.0,
        }];
        let (l, g) = loss_gradient(&p, &batch, &Objective::SQUARED).unwrap();
        assert_eq!(l, 1.0);
        assert_eq!(g.to_flat(), vec![-2.0]);
    }

    #[test]
    fn perfect_fit_has_zero_gradient() {
        let p = scalar_model(2.0);
        let u = FeatureInput::Dense(vec![1.5]);
        let i = FeatureInput::Dense(vec![]);
        let batch = [Example {
            user: &u,
            item: &i,
            label: 3.0,
        }];
        let (l, g) = loss_gradient(&p, &batch, &Objective::SQUARED).unwrap();
        assert_eq!(l, 0.0);
        assert!(g.values().all(|v| *v == 0.0));
    }

    #[test]
    fn empty_batch_rejected() {
        let p = scalar_model(1.0);
        assert!(matches!(loss_gradient(&p, &[], &Objective::SQUARED), Err(Error::EmptyBatch(_))));
    }

    fn random_two_tower(seed: u64) -> (ModelParameters, Vec<(FeatureInput, FeatureInput, f64)>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let spec = ModelSpec {
            variant: Variant::TwoTower,
            hidden: vec![5, 3],
            bias: true,
        };
        let p = ModelParameters::init(&spec, FeatureEncoder::pretrained(4), FeatureEncoder::pretrained(3), &mut rng)
            .unwrap();
        let data = (0..4)
            .map(|_| {
                (
                    FeatureInput::Dense((0..4).map(|_| rng.random_range(-1.0..1.0)).collect()),
                    FeatureInput::Dense((0..3).map(|_| rng.random_range(-1.0..1.0)).collect()),
                    rng.random_range(0.0..2.0),
                )
            })
            .collect();
        (p, data)
    }

    #[test]
    fn two_tower_gradient_matches_central_differences() {
        let (p, data) = random_two_tower(31);
        let batch: Vec<Example> = data
            .iter()
            .map(|(u, i, y)| Example {
                user: u,
                item: i,
                label: *y,
            })
            .collect();
        let obj = Objective::SQUARED;
        let (_, g) = loss_gradient(&p, &batch, &obj).unwrap();
        let flat = p.to_flat();
        let analytic = g.to_flat();
        let h = 1e-4;
        for k in 0..flat.len() {
            let mut plus = p.clone();
            let mut v = flat.clone();
            v[k] += h;
            plus.assign_flat(&v).unwrap();
            let mut minus = p.clone();
            v[k] -= 2.0 * h;
            minus.assign_flat(&v).unwrap();
            let fd = (loss_value(&plus, &batch, &obj).unwrap() - loss_value(&minus, &batch, &obj).unwrap()) / (2.0 * h);
            let err = (fd - analytic[k]).abs() / fd.abs().max(analytic[k].abs()).max(1e-7);
            assert!(err < 1e-4 || (fd - analytic[k]).abs() < 1e-7, "param {k}: fd {fd} vs {}", analytic[k]);
        }
    }

    #[test]
    fn batch_gradient_is_mean_of_single_gradients() {
        let (p, data) = random_two_tower(44);
        let batch: Vec<Example> = data
            .iter()
            .map(|(u, i, y)| Example {
                user: u,
                item: i,
                label: *y,
            })
            .collect();
        let obj = Objective::for_labels(LossKind::Squared, false);
        let (_, g) = loss_gradient(&p, &batch, &obj).unwrap();
        let mut sum = GradientSet::zeros_like(&p);
        for ex in &batch {
            let (_, gi) = loss_gradient(&p, std::slice::from_ref(ex), &obj).unwrap();
            sum.add_assign(&gi).unwrap();
        }
        sum.scale(1.0 / batch.len() as f64);
        for (a, b) in g.values().zip(sum.values()) {
            assert!((a - b).abs() <= 1e-10 * a.abs().max(b.abs()).max(1e-12));
        }
    }
}
