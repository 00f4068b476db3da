use rand::Rng;

use super::layer::{Activation, Mlp};
use crate::error::{Error, Result};
use crate::models::encoder::{FeatureEncoder, FeatureInput};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Variant {
    TwoTower,
    JointMlp,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Network {
    /// Separate user and item MLPs combined by a dot product.
    TwoTower { user: Mlp, item: Mlp },
    /// One MLP over `[user; item]` with a scalar output.
    Joint(Mlp),
}

/// Every trainable quantity of a scoring model.
///
/// Iteration order of [`values`](Self::values) is fixed: user encoder tables,
/// item encoder tables, then network layers (weights before biases). Optimizer
/// state and checkpoints rely on that order.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParameters {
    pub network: Network,
    pub user_encoder: FeatureEncoder,
    pub item_encoder: FeatureEncoder,
}

/// Encoder sizes, hidden widths and output geometry used to initialize a model.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelSpec {
    pub variant: Variant,
    /// Widths after the encoded input. For `TwoTower` the last entry is the
    /// tower output (dot-product) dimension; `JointMlp` appends a final width-1 layer.
    pub hidden: Vec<usize>,
    pub bias: bool,
}

impl ModelParameters {
    pub fn new(network: Network, user_encoder: FeatureEncoder, item_encoder: FeatureEncoder) -> Result<Self> {
        let p = Self {
            network,
            user_encoder,
            item_encoder,
        };
        p.validate()?;
        Ok(p)
    }

    /// He-style initialization. Hidden layers use ReLU, the final layer is linear.
    pub fn init<R: Rng + ?Sized>(
        spec: &ModelSpec,
        user_encoder: FeatureEncoder,
        item_encoder: FeatureEncoder,
        rng: &mut R,
    ) -> Result<Self> {
        if spec.hidden.is_empty() {
            return Err(Error::Config("model needs at least one layer width".into()));
        }
        let network = match spec.variant {
            Variant::TwoTower => {
                let mut ud = vec![user_encoder.output_dim()];
                ud.extend(&spec.hidden);
                let mut id = vec![item_encoder.output_dim()];
                id.extend(&spec.hidden);
                let user = Mlp::init(&ud, spec.bias, Activation::Relu, Activation::Identity, rng)?;
                let item = Mlp::init(&id, spec.bias, Activation::Relu, Activation::Identity, rng)?;
                Network::TwoTower { user, item }
            }
            Variant::JointMlp => {
                let mut dims = vec![user_encoder.output_dim() + item_encoder.output_dim()];
                dims.extend(&spec.hidden);
                dims.push(1);
                Network::Joint(Mlp::init(&dims, spec.bias, Activation::Relu, Activation::Identity, rng)?)
            }
        };
        Self::new(network, user_encoder, item_encoder)
    }

    pub fn variant(&self) -> Variant {
        match self.network {
            Network::TwoTower { .. } => Variant::TwoTower,
            Network::Joint(_) => Variant::JointMlp,
        }
    }

    fn validate(&self) -> Result<()> {
        match &self.network {
            Network::TwoTower { user, item } => {
                if user.out_dim() != item.out_dim() {
                    return Err(Error::shape("item tower output", user.out_dim(), item.out_dim()));
                }
                if user.in_dim() != self.user_encoder.output_dim() {
                    return Err(Error::shape("user tower input", self.user_encoder.output_dim(), user.in_dim()));
                }
                if item.in_dim() != self.item_encoder.output_dim() {
                    return Err(Error::shape("item tower input", self.item_encoder.output_dim(), item.in_dim()));
                }
            }
            Network::Joint(mlp) => {
                if mlp.out_dim() != 1 {
                    return Err(Error::shape("joint MLP output", 1, mlp.out_dim()));
                }
                let want = self.user_encoder.output_dim() + self.item_encoder.output_dim();
                if mlp.in_dim() != want {
                    return Err(Error::shape("joint MLP input", want, mlp.in_dim()));
                }
            }
        }
        Ok(())
    }

    /// Raw (unlinked) model score.
    pub fn score(&self, user: &FeatureInput, item: &FeatureInput) -> Result<f64> {
        match &self.network {
            Network::TwoTower { user: ut, item: it } => {
                let hu = ut.forward(&self.user_encoder.encode(user)?)?;
                let hi = it.forward(&self.item_encoder.encode(item)?)?;
                Ok(dot(&hu, &hi))
            }
            Network::Joint(mlp) => {
                let mut x = self.user_encoder.encode(user)?;
                self.item_encoder.encode_into(item, &mut x)?;
                Ok(mlp.forward(&x)?[0])
            }
        }
    }

    pub fn zeros_like(&self) -> Self {
        let network = match &self.network {
            Network::TwoTower { user, item } => Network::TwoTower {
                user: user.zeros_like(),
                item: item.zeros_like(),
            },
            Network::Joint(m) => Network::Joint(m.zeros_like()),
        };
        Self {
            network,
            user_encoder: self.user_encoder.zeros_like(),
            item_encoder: self.item_encoder.zeros_like(),
        }
    }

    pub fn same_shape(&self, other: &Self) -> bool {
        let net = match (&self.network, &other.network) {
            (Network::TwoTower { user: a, item: b }, Network::TwoTower { user: c, item: d }) => {
                a.same_shape(c) && b.same_shape(d)
            }
            (Network::Joint(a), Network::Joint(b)) => a.same_shape(b),
            _ => false,
        };
        net && self.user_encoder.same_shape(&other.user_encoder)
            && self.item_encoder.same_shape(&other.item_encoder)
    }

    pub fn values(&self) -> impl Iterator<Item = &f64> {
        let net: Box<dyn Iterator<Item = &f64>> = match &self.network {
            Network::TwoTower { user, item } => Box::new(user.values().chain(item.values())),
            Network::Joint(m) => Box::new(m.values()),
        };
        self.user_encoder
            .values()
            .chain(self.item_encoder.values())
            .chain(net)
    }

    pub fn values_mut(&mut self) -> impl Iterator<Item = &mut f64> {
        let net: Box<dyn Iterator<Item = &mut f64>> = match &mut self.network {
            Network::TwoTower { user, item } => Box::new(user.values_mut().chain(item.values_mut())),
            Network::Joint(m) => Box::new(m.values_mut()),
        };
        self.user_encoder
            .values_mut()
            .chain(self.item_encoder.values_mut())
            .chain(net)
    }

    pub fn num_values(&self) -> usize {
        self.values().count()
    }

    pub fn to_flat(&self) -> Vec<f64> {
        self.values().copied().collect()
    }

    /// Overwrites all entries from `flat` (same order as [`values`](Self::values)).
    pub fn assign_flat(&mut self, flat: &[f64]) -> Result<()> {
        let n = self.num_values();
        if flat.len() != n {
            return Err(Error::shape("flat parameter vector", n, flat.len()));
        }
        for (p, v) in self.values_mut().zip(flat) {
            *p = *v;
        }
        Ok(())
    }

    pub fn all_finite(&self) -> bool {
        self.values().all(|v| v.is_finite())
    }
}

/// Partial derivatives of a scalar loss, shaped exactly like the
/// [`ModelParameters`] they differentiate.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientSet(pub(crate) ModelParameters);

impl GradientSet {
    pub fn zeros_like(params: &ModelParameters) -> Self {
        GradientSet(params.zeros_like())
    }

    /// Gradient shaped like `shape` holding `flat` in parameter order.
    pub fn from_flat(shape: &ModelParameters, flat: &[f64]) -> Result<Self> {
        let mut g = shape.zeros_like();
        g.assign_flat(flat)?;
        Ok(GradientSet(g))
    }

    pub fn as_params(&self) -> &ModelParameters {
        &self.0
    }

    pub fn values(&self) -> impl Iterator<Item = &f64> {
        self.0.values()
    }

    pub fn to_flat(&self) -> Vec<f64> {
        self.0.to_flat()
    }

    pub fn add_assign(&mut self, other: &GradientSet) -> Result<()> {
        if !self.0.same_shape(&other.0) {
            return Err(Error::Config("gradient shapes differ".into()));
        }
        for (a, b) in self.0.values_mut().zip(other.0.values()) {
            *a += b;
        }
        Ok(())
    }

    pub fn scale(&mut self, c: f64) {
        for v in self.0.values_mut() {
            *v *= c;
        }
    }

    pub fn all_finite(&self) -> bool {
        self.0.all_finite()
    }

    pub fn max_abs(&self) -> f64 {
        self.values().fold(0.0, |m, v| m.max(v.abs()))
    }
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Dot product of the two tower outputs.
pub fn score_two_tower(params: &ModelParameters, user_feat: &FeatureInput, item_feat: &FeatureInput) -> Result<f64> {
    if params.variant() != Variant::TwoTower {
        return Err(Error::Config("score_two_tower needs a two-tower model".into()));
    }
    params.score(user_feat, item_feat)
}

/// Scalar output of the joint MLP on `[user; item]`.
pub fn score_joint(params: &ModelParameters, user_feat: &FeatureInput, item_feat: &FeatureInput) -> Result<f64> {
    if params.variant() != Variant::JointMlp {
        return Err(Error::Config("score_joint needs a joint-MLP model".into()));
    }
    params.score(user_feat, item_feat)
}
