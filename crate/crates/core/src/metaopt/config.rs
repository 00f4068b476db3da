use crate::datapipe::TaskUnit;
use crate::error::{Error, Result};
use crate::models::ModelKind;
use crate::numcore::{LossKind, Objective};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum OuterOptimizer {
    Sgd,
    Adam,
}

impl OuterOptimizer {
    pub fn name(self) -> &'static str {
        match self {
            OuterOptimizer::Sgd => "sgd",
            OuterOptimizer::Adam => "adam",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        match s {
            "sgd" => Some(OuterOptimizer::Sgd),
            "adam" => Some(OuterOptimizer::Adam),
            _ => None,
        }
    }
}

/// Hyperparameters of meta-training and per-shop adaptation.
#[derive(Debug, Clone, PartialEq)]
pub struct MetaConfig {
    /// Inner (local) stepsize.
    pub alpha: f64,
    /// Outer (global) stepsize.
    pub beta: f64,
    /// Local gradient steps per task.
    pub local_steps: usize,
    /// Weight of the fairness regularizer.
    pub gamma: f64,
    pub shop_batch_size: usize,
    pub support_size: usize,
    /// Cap on query records per task and step; `None` uses every
    /// non-support record.
    pub query_size: Option<usize>,
    pub objective: Objective,
    pub model_kind: ModelKind,
    pub task_unit: TaskUnit,
    pub outer_optimizer: OuterOptimizer,
    pub seed: u64,
}

impl Default for MetaConfig {
    fn default() -> Self {
        Self {
            alpha: 5e-6,
            beta: 5e-5,
            local_steps: 2,
            gamma: 0.0,
            shop_batch_size: 32,
            support_size: 10,
            query_size: None,
            objective: Objective::for_labels(LossKind::BinaryCrossEntropy, true),
            model_kind: ModelKind::MeSh,
            task_unit: TaskUnit::Shop,
            outer_optimizer: OuterOptimizer::Sgd,
            seed: 0,
        }
    }
}

impl MetaConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.into()));
        if !(self.alpha >= 0.0 && self.alpha.is_finite()) {
            return bad("alpha must be a non-negative finite number");
        }
        if !(self.beta > 0.0 && self.beta.is_finite()) {
            return bad("beta must be positive");
        }
        if self.local_steps == 0 {
            return bad("local_steps must be at least 1");
        }
        if !(self.gamma >= 0.0 && self.gamma.is_finite()) {
            return bad("gamma must be non-negative");
        }
        if self.shop_batch_size == 0 {
            return bad("shop_batch_size must be positive");
        }
        if self.support_size == 0 {
            return bad("support_size must be positive");
        }
        if self.query_size == Some(0) {
            return bad("query_size must be positive when set");
        }
        if self.model_kind == ModelKind::Baseline {
            return bad("the baseline is not meta-trained");
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        MetaConfig::default().validate().unwrap();
    }

    #[test]
    fn zero_alpha_is_allowed_zero_steps_are_not() {
        let c = MetaConfig {
            alpha: 0.0,
            ..Default::default()
        };
        c.validate().unwrap();
        let c = MetaConfig {
            local_steps: 0,
            ..Default::default()
        };
        assert!(c.validate().is_err());
    }

    #[test]
    fn negative_gamma_rejected() {
        let c = MetaConfig {
            gamma: -0.1,
            ..Default::default()
        };
        assert!(matches!(c.validate(), Err(Error::Config(_))));
    }
}
