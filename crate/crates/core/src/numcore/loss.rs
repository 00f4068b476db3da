use crate::error::{Error, Result};

/// Probability clamp applied before taking logarithms.
pub const BCE_EPS: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LossKind {
    Squared,
    BinaryCrossEntropy,
}

/// Transform applied to the raw model score before it meets the loss.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Link {
    Identity,
    Sigmoid,
}

/// Loss plus output link. The prediction compared against labels is `link(score)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Objective {
    pub loss: LossKind,
    pub link: Link,
}

impl Objective {
    pub const SQUARED: Objective = Objective {
        loss: LossKind::Squared,
        link: Link::Identity,
    };

    /// Default pairing: sigmoid link for binary labels, identity for ratings.
    pub fn for_labels(loss: LossKind, binary_labels: bool) -> Self {
        Objective {
            loss,
            link: if binary_labels { Link::Sigmoid } else { Link::Identity },
        }
    }

    /// Mean loss and its derivative with respect to each prediction.
    pub fn value_and_grad(&self, predictions: &[f64], labels: &[f64]) -> Result<(f64, Vec<f64>)> {
        match self.loss {
            LossKind::Squared => squared_loss_grad(predictions, labels),
            LossKind::BinaryCrossEntropy => bce_loss_grad(predictions, labels),
        }
    }
}

fn check(predictions: &[f64], labels: &[f64]) -> Result<()> {
    if predictions.is_empty() {
        return Err(Error::EmptyBatch("loss over zero predictions"));
    }
    if predictions.len() != labels.len() {
        return Err(Error::shape("labels", predictions.len(), labels.len()));
    }
    Ok(())
}

/// `(1/n) Σ (y - ŷ)²`.
pub fn squared_loss(predictions: &[f64], labels: &[f64]) -> Result<f64> {
    Ok(squared_loss_grad(predictions, labels)?.0)
}

fn squared_loss_grad(predictions: &[f64], labels: &[f64]) -> Result<(f64, Vec<f64>)> {
    check(predictions, labels)?;
    let n = predictions.len() as f64;
    let mut total = 0.0;
    let grads = predictions
        .iter()
        .zip(labels)
        .map(|(p, y)| {
            let d = p - y;
            total += d * d;
            2.0 * d / n
        })
        .collect();
    Ok((total / n, grads))
}

/// `-(1/n) Σ [y ln ŷ + (1-y) ln(1-ŷ)]` with `ŷ` clamped to `[1e-7, 1-1e-7]`.
pub fn bce_loss(predictions: &[f64], labels: &[f64]) -> Result<f64> {
    Ok(bce_loss_grad(predictions, labels)?.0)
}

fn bce_loss_grad(predictions: &[f64], labels: &[f64]) -> Result<(f64, Vec<f64>)> {
    check(predictions, labels)?;
    let n = predictions.len() as f64;
    let mut total = 0.0;
    let grads = predictions
        .iter()
        .zip(labels)
        .map(|(&p, &y)| {
            let q = p.clamp(BCE_EPS, 1.0 - BCE_EPS);
            total -= y * q.ln() + (1.0 - y) * (1.0 - q).ln();
            if q != p {
                // clamped: flat region
                0.0
            } else {
                (q - y) / (q * (1.0 - q)) / n
            }
        })
        .collect();
    Ok((total / n, grads))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn squared_examples() {
        assert_eq!(squared_loss(&[0.5], &[1.0]).unwrap(), 0.25);
        assert_eq!(squared_loss(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
        assert!((squared_loss(&[0.0, 1.0, 2.0], &[1.0, 1.0, 1.0]).unwrap() - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn empty_batch_is_error() {
        assert!(matches!(squared_loss(&[], &[]), Err(Error::EmptyBatch(_))));
        assert!(matches!(bce_loss(&[], &[]), Err(Error::EmptyBatch(_))));
    }

    #[test]
    fn bce_examples() {
        let ln2 = std::f64::consts::LN_2;
        assert!((bce_loss(&[0.5], &[1.0]).unwrap() - ln2).abs() < 1e-15);
        assert!((bce_loss(&[0.5, 0.5], &[0.0, 1.0]).unwrap() - ln2).abs() < 1e-15);
    }

    #[test]
    fn bce_seeded_batch_matches_scalar_loop() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(17);
        let p: Vec<f64> = (0..12).map(|_| rng.random_range(0.01..0.99)).collect();
        let y: Vec<f64> = (0..12).map(|_| if rng.random_bool(0.5) { 1.0 } else { 0.0 }).collect();
        let mut want = 0.0;
        for i in 0..12 {
            want += if y[i] == 1.0 { -(p[i].ln()) } else { -((1.0 - p[i]).ln()) };
        }
        want /= 12.0;
        assert!((bce_loss(&p, &y).unwrap() - want).abs() < 1e-12);
    }

    #[test]
    fn bce_clamps_extremes() {
        let v = bce_loss(&[0.0, 1.0], &[1.0, 0.0]).unwrap();
        assert!(v.is_finite());
        assert!((v + (BCE_EPS).ln()).abs() < 1e-9);
    }

    proptest! {
        #[test]
        fn squared_is_nonnegative_and_zero_only_at_fit(
            pairs in prop::collection::vec((-10.0f64..10.0, -10.0f64..10.0), 1..20)
        ) {
            let (p, y): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
            let l = squared_loss(&p, &y).unwrap();
            prop_assert!(l >= 0.0);
            prop_assert_eq!(l == 0.0, p == y);
        }
    }
}
