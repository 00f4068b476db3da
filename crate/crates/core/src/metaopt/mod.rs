//! Meta-training (first-order MAML over shop tasks), fair meta-training,
//! per-shop inference and the non-meta trainers used as comparators.

mod config;
mod maml;
mod plain;
mod trainer;

pub use crate::datapipe::TaskUnit;
pub use config::{MetaConfig, OuterOptimizer};
pub use maml::{
    fmst_train_step, local_adapt, local_adapt_with, meta_gradient, meta_inference, meta_train_step, regularizer_option1,
    regularizer_option2, task_gradient, task_meta_gradient, RegularizerKind, TaskBatch,
};
pub use plain::{baseline_train, nonmeta_train, one_shop_train, plain_train, PlainConfig, PlainOutcome};
pub use trainer::{meta_train, resample_split, MetaOutcome, Schedule, StepRecord};
