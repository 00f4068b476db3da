pub mod datapipe;
pub mod error;
pub mod experiment;
pub mod metaopt;
pub mod metrics;
pub mod models;
pub mod numcore;
mod rng;

pub use error::{Error, ErrorCategory, Result};
pub use models::{FeatureEncoder, FeatureInput, ModelKind, TrainedModel};
pub use numcore::{Example, GradientSet, ModelParameters, Objective};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/tasks.md")]
    mod tasks {}
    #[doc = include_str!("../../../book/src/meta-training.md")]
    mod meta_training {}
    #[doc = include_str!("../../../book/src/fairness.md")]
    mod fairness {}
    #[doc = include_str!("../../../book/src/negatives.md")]
    mod negatives {}
    #[doc = include_str!("../../../book/src/evaluation.md")]
    mod evaluation {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
