//! Dense neural-network substrate: parameter containers, forward passes,
//! analytic gradients and plain first-order update rules.
//!
//! All arithmetic is `f64`. Operations are pure: they read their inputs and
//! return fresh values.

mod grad;
mod layer;
mod loss;
mod optim;
mod params;

pub use grad::{loss_gradient, loss_value, output_gradient, predict_batch, Example};
pub use layer::{mlp_forward, sigmoid, Activation, DenseLayer, Mlp, Trace};
pub use loss::{bce_loss, squared_loss, Link, LossKind, Objective, BCE_EPS};
pub use optim::{adam_step, sgd_step, AdamState, ADAM_BETA1, ADAM_BETA2, ADAM_EPS};
pub(crate) use optim::adam_apply;
pub use params::{score_joint, score_two_tower, GradientSet, ModelParameters, ModelSpec, Network, Variant};
