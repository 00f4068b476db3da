//! Run configuration: one TOML file per run, command-line flags on top.
//!
//! Precedence, highest first: command-line flags, the config file, built-in
//! defaults. Relative paths in a file resolve against the file's directory;
//! relative paths given as flags resolve against the working directory.
//!
//! A run manifest embeds the resolved configuration under `[config]`, so a
//! manifest is itself a valid `--config` argument.

use std::path::{Path, PathBuf};

use meshop::datapipe::{FormatSpec, NegativeStrategy, SyntheticSpec, TaskUnit};
use meshop::experiment::{ComparisonConfig, CutoffK, ModelConfig, TargetingOptions};
use meshop::metaopt::{MetaConfig, OuterOptimizer, PlainConfig, RegularizerKind, Schedule};
use meshop::metrics::{RecallMode, DEFAULT_THRESHOLDS};
use meshop::numcore::{LossKind, Objective};
use meshop::{Error, ModelKind, Result};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub seed: Option<u64>,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    #[serde(default)]
    pub data: DataSection,
    #[serde(default)]
    pub synthetic: SyntheticSection,
    #[serde(default)]
    pub model: ModelSection,
    #[serde(default)]
    pub train: TrainSection,
    #[serde(default)]
    pub evaluate: EvaluateSection,
    #[serde(default)]
    pub ablation: AblationSection,
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: None,
            output_dir: default_output_dir(),
            data: DataSection::default(),
            synthetic: SyntheticSection::default(),
            model: ModelSection::default(),
            train: TrainSection::default(),
            evaluate: EvaluateSection::default(),
            ablation: AblationSection::default(),
        }
    }
}

/// Input files. Interaction files use the `user_id,item_id,shop_id,label`
/// layout; feature files use `id,<col>,...`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub train: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub test: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub support: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub user_features: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub item_features: Option<PathBuf>,
    pub delimiter: char,
}

impl Default for DataSection {
    fn default() -> Self {
        Self {
            train: None,
            test: None,
            support: None,
            user_features: None,
            item_features: None,
            delimiter: ',',
        }
    }
}

/// Mirrors [`SyntheticSpec`]; the seed is the run seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticSection {
    pub n_users: usize,
    pub n_items: usize,
    pub n_shops: usize,
    pub n_new_shops: usize,
    pub latent_dim: usize,
    pub pareto_exponent: f64,
    pub noise_std: f64,
    pub threshold: f64,
    pub shop_effect: f64,
    pub feature_noise: f64,
    pub n_interactions: usize,
    pub min_shop_interactions: usize,
    pub test_fraction: f64,
    pub min_test_interactions: usize,
    pub n_genres: usize,
}

impl Default for SyntheticSection {
    fn default() -> Self {
        let s = ComparisonConfig::default().data;
        Self {
            n_users: s.n_users,
            n_items: s.n_items,
            n_shops: s.n_shops,
            n_new_shops: s.n_new_shops,
            latent_dim: s.latent_dim,
            pareto_exponent: s.pareto_exponent,
            noise_std: s.noise_std,
            threshold: s.threshold,
            shop_effect: s.shop_effect,
            feature_noise: s.feature_noise,
            n_interactions: s.n_interactions,
            min_shop_interactions: s.min_shop_interactions,
            test_fraction: s.test_fraction,
            min_test_interactions: s.min_test_interactions,
            n_genres: s.n_genres,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelSection {
    /// `mesh`, `mesh_i`, `wide_deep` or `baseline`.
    pub kind: String,
    /// Hidden widths; for the baseline, the item mapper widths including
    /// its output.
    pub hidden: Vec<usize>,
    pub embedding_dim: usize,
    pub bias: bool,
    /// Baseline hinge margin.
    pub margin: f64,
    /// Baseline weight of the negative term.
    pub neg_weight: f64,
}

impl Default for ModelSection {
    fn default() -> Self {
        let m = ModelConfig::default();
        Self {
            kind: m.kind.name().into(),
            hidden: m.hidden,
            embedding_dim: m.embedding_dim,
            bias: m.bias,
            margin: 1.0,
            neg_weight: 1.0,
        }
    }
}

/// Trainer selection.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrainerKind {
    Meta,
    Fmst,
    NonMeta,
    OneShop,
    Baseline,
}

impl TrainerKind {
    pub fn from_name(s: &str) -> Option<Self> {
        match s {
            "meta" => Some(TrainerKind::Meta),
            "fmst" => Some(TrainerKind::Fmst),
            "nonmeta" => Some(TrainerKind::NonMeta),
            "one_shop" => Some(TrainerKind::OneShop),
            "baseline" => Some(TrainerKind::Baseline),
            _ => None,
        }
    }

    pub fn is_meta(self) -> bool {
        matches!(self, TrainerKind::Meta | TrainerKind::Fmst)
    }
}

/// Mirrors [`MetaConfig`], [`Schedule`] and [`PlainConfig`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainSection {
    /// `meta`, `fmst`, `nonmeta`, `one_shop` or `baseline`.
    pub trainer: String,
    pub alpha: f64,
    pub beta: f64,
    pub local_steps: usize,
    pub gamma: f64,
    /// `option1` or `option2`; required by `fmst`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub regularizer: Option<String>,
    pub shop_batch_size: usize,
    pub support_size: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub query_size: Option<usize>,
    /// `bce` (sigmoid link) or `squared` (identity link).
    pub loss: String,
    /// `adam` or `sgd`, for the outer loop and the plain trainers.
    pub optimizer: String,
    /// `shop`, `item` or `user`.
    pub task_unit: String,
    pub meta_steps: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub patience: Option<usize>,
    pub min_task_interactions: usize,
    pub stepsize: f64,
    pub epochs: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub batch_size: Option<usize>,
    /// Shop trained by `one_shop`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub shop: Option<u64>,
    /// `n0`, `n1` or `n2`: replace labelled negatives with sampled ones.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub negatives: Option<String>,
    pub negative_ratio: f64,
}

impl Default for TrainSection {
    fn default() -> Self {
        let c = ComparisonConfig::default();
        Self {
            trainer: "meta".into(),
            alpha: c.meta.alpha,
            beta: c.meta.beta,
            local_steps: c.meta.local_steps,
            gamma: c.meta.gamma,
            regularizer: None,
            shop_batch_size: c.meta.shop_batch_size,
            support_size: c.meta.support_size,
            query_size: c.meta.query_size,
            loss: "bce".into(),
            optimizer: c.meta.outer_optimizer.name().into(),
            task_unit: "shop".into(),
            meta_steps: c.schedule.meta_steps,
            patience: c.schedule.patience,
            min_task_interactions: c.min_task_interactions,
            stepsize: c.pooled.stepsize,
            epochs: c.pooled.epochs,
            batch_size: c.pooled.batch_size,
            shop: None,
            negatives: None,
            negative_ratio: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvaluateSection {
    /// Any of `recall`, `ndcg`, `mae`.
    pub metrics: Vec<String>,
    /// Recall cutoff as a share of the candidate pool.
    pub k_fraction: f64,
    /// Absolute recall cutoff; overrides `k_fraction`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub k: Option<usize>,
    /// `standard` or `paper`.
    pub recall_mode: String,
    pub ndcg_ks: Vec<usize>,
    pub thresholds: Vec<f64>,
    /// Adapt to each test shop's support records before scoring. Defaults to
    /// whether the trainer is a meta-trainer.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub adapt: Option<bool>,
}

impl Default for EvaluateSection {
    fn default() -> Self {
        Self {
            metrics: vec!["recall".into()],
            k_fraction: 0.1,
            k: None,
            recall_mode: "standard".into(),
            ndcg_ks: vec![1, 3],
            thresholds: DEFAULT_THRESHOLDS.to_vec(),
            adapt: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AblationSection {
    /// `one_shop`, `negative_sampling`, `debias_gamma` or `task_unit`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub one_shop_count: usize,
    pub gammas: Vec<f64>,
    /// Regularizer of the `debias_gamma` grid.
    pub regularizer: String,
}

impl Default for AblationSection {
    fn default() -> Self {
        Self {
            name: None,
            one_shop_count: ComparisonConfig::default().one_shop_count,
            gammas: vec![0.0, 0.01, 0.8],
            regularizer: "option1".into(),
        }
    }
}

fn config_err(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

fn parse_name<T>(field: &str, value: &str, parse: impl Fn(&str) -> Option<T>) -> Result<T> {
    parse(value).ok_or_else(|| config_err(format!("unknown {field} `{value}`")))
}

impl RunConfig {
    /// Parses a config file or a run manifest.
    pub fn from_toml(text: &str) -> Result<Self> {
        let value: toml::Table = toml::from_str(text).map_err(|e| config_err(format!("invalid config: {e}")))?;
        let table = match value.get("config") {
            Some(toml::Value::Table(inner)) if value.contains_key("command") => inner.clone(),
            _ => value,
        };
        table.try_into().map_err(|e: toml::de::Error| config_err(format!("invalid config: {e}")))
    }

    /// Reads `path` and resolves its relative paths against its directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| config_err(format!("cannot read config {}: {e}", path.display())))?;
        let mut cfg = Self::from_toml(&text)?;
        let base = path.parent().unwrap_or(Path::new(""));
        cfg.resolve_paths(base);
        Ok(cfg)
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.output_dir);
        for p in [
            &mut self.data.train,
            &mut self.data.test,
            &mut self.data.support,
            &mut self.data.user_features,
            &mut self.data.item_features,
        ]
        .into_iter()
        .flatten()
        {
            fix(p);
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("run config serializes")
    }

    pub fn seed(&self) -> Result<u64> {
        self.seed.ok_or_else(|| config_err("seed is mandatory (set `seed` or pass --seed)"))
    }

    /// Checks every field that a command may read, including that all
    /// referenced input files exist.
    pub fn validate(&self) -> Result<()> {
        self.seed()?;
        for (name, p) in [
            ("data.train", &self.data.train),
            ("data.test", &self.data.test),
            ("data.support", &self.data.support),
            ("data.user_features", &self.data.user_features),
            ("data.item_features", &self.data.item_features),
        ] {
            if let Some(p) = p {
                if !p.is_file() {
                    return Err(config_err(format!("{name}: {} does not exist", p.display())));
                }
            }
        }
        if !self.data.delimiter.is_ascii() {
            return Err(config_err("data.delimiter must be one ASCII character"));
        }
        self.synthetic_spec()?;
        self.model_kind()?;
        let trainer = self.trainer()?;
        self.meta_config()?.validate()?;
        self.regularizer()?;
        if trainer == TrainerKind::Fmst && self.regularizer()?.is_none() {
            return Err(config_err("trainer `fmst` needs train.regularizer"));
        }
        self.negatives()?;
        if !(self.train.negative_ratio > 0.0 && self.train.negative_ratio.is_finite()) {
            return Err(config_err("train.negative_ratio must be positive"));
        }
        if (trainer == TrainerKind::Baseline) != (self.model_kind()? == ModelKind::Baseline) {
            return Err(config_err("trainer `baseline` and model kind `baseline` go together"));
        }
        self.targeting()?;
        for m in &self.evaluate.metrics {
            if !matches!(m.as_str(), "recall" | "ndcg" | "mae") {
                return Err(config_err(format!("unknown metric `{m}`")));
            }
        }
        if self.evaluate.ndcg_ks.contains(&0) {
            return Err(config_err("evaluate.ndcg_ks entries must be at least 1"));
        }
        if let Some(name) = &self.ablation.name {
            parse_name("ablation", name, Ablation::from_name)?;
        }
        parse_name("ablation.regularizer", &self.ablation.regularizer, RegularizerKind::from_name)?;
        Ok(())
    }

    pub fn format(&self) -> FormatSpec {
        FormatSpec {
            delimiter: self.data.delimiter as u8,
        }
    }

    pub fn synthetic_spec(&self) -> Result<SyntheticSpec> {
        let s = &self.synthetic;
        Ok(SyntheticSpec {
            n_users: s.n_users,
            n_items: s.n_items,
            n_shops: s.n_shops,
            n_new_shops: s.n_new_shops,
            latent_dim: s.latent_dim,
            pareto_exponent: s.pareto_exponent,
            noise_std: s.noise_std,
            threshold: s.threshold,
            shop_effect: s.shop_effect,
            feature_noise: s.feature_noise,
            n_interactions: s.n_interactions,
            min_shop_interactions: s.min_shop_interactions,
            test_fraction: s.test_fraction,
            min_test_interactions: s.min_test_interactions,
            n_genres: s.n_genres,
            seed: self.seed()?,
        })
    }

    pub fn model_kind(&self) -> Result<ModelKind> {
        parse_name("model.kind", &self.model.kind, ModelKind::from_name)
    }

    pub fn model_config(&self) -> Result<ModelConfig> {
        Ok(ModelConfig {
            kind: self.model_kind()?,
            hidden: self.model.hidden.clone(),
            embedding_dim: self.model.embedding_dim,
            bias: self.model.bias,
        })
    }

    pub fn trainer(&self) -> Result<TrainerKind> {
        parse_name("train.trainer", &self.train.trainer, TrainerKind::from_name)
    }

    pub fn objective(&self) -> Result<Objective> {
        match self.train.loss.as_str() {
            "bce" => Ok(Objective::for_labels(LossKind::BinaryCrossEntropy, true)),
            "squared" => Ok(Objective::SQUARED),
            other => Err(config_err(format!("unknown train.loss `{other}`"))),
        }
    }

    fn optimizer(&self) -> Result<OuterOptimizer> {
        parse_name("train.optimizer", &self.train.optimizer, OuterOptimizer::from_name)
    }

    pub fn regularizer(&self) -> Result<Option<RegularizerKind>> {
        self.train
            .regularizer
            .as_deref()
            .map(|r| parse_name("train.regularizer", r, RegularizerKind::from_name))
            .transpose()
    }

    pub fn negatives(&self) -> Result<Option<(NegativeStrategy, f64)>> {
        self.train
            .negatives
            .as_deref()
            .map(|n| parse_name("train.negatives", n, NegativeStrategy::from_name).map(|s| (s, self.train.negative_ratio)))
            .transpose()
    }

    pub fn meta_config(&self) -> Result<MetaConfig> {
        let t = &self.train;
        let kind = self.model_kind()?;
        Ok(MetaConfig {
            alpha: t.alpha,
            beta: t.beta,
            local_steps: t.local_steps,
            gamma: t.gamma,
            shop_batch_size: t.shop_batch_size,
            support_size: t.support_size,
            query_size: t.query_size,
            objective: self.objective()?,
            // the baseline has no meta-training; any scoring kind validates
            model_kind: if kind == ModelKind::Baseline { ModelKind::MeSh } else { kind },
            task_unit: parse_name("train.task_unit", &t.task_unit, TaskUnit::from_name)?,
            outer_optimizer: self.optimizer()?,
            seed: self.seed()?,
        })
    }

    pub fn schedule(&self) -> Schedule {
        Schedule {
            meta_steps: self.train.meta_steps,
            patience: self.train.patience,
        }
    }

    pub fn plain_config(&self) -> Result<PlainConfig> {
        Ok(PlainConfig {
            stepsize: self.train.stepsize,
            epochs: self.train.epochs,
            batch_size: self.train.batch_size,
            objective: self.objective()?,
            optimizer: self.optimizer()?,
            seed: self.seed()?,
            ..PlainConfig::default()
        })
    }

    pub fn targeting(&self) -> Result<TargetingOptions> {
        let k = match self.evaluate.k {
            Some(k) => CutoffK::Absolute(k),
            None => CutoffK::Fraction(self.evaluate.k_fraction),
        };
        if let CutoffK::Fraction(f) = k {
            if !(f > 0.0 && f <= 1.0) {
                return Err(config_err(format!("evaluate.k_fraction {f} outside (0, 1]")));
            }
        }
        let mode = match self.evaluate.recall_mode.as_str() {
            "standard" => RecallMode::Standard,
            "paper" => RecallMode::PaperLiteral,
            other => return Err(config_err(format!("unknown evaluate.recall_mode `{other}`"))),
        };
        Ok(TargetingOptions { k, mode })
    }

    /// Whether `evaluate` adapts per shop before scoring.
    pub fn adapt_on_evaluate(&self) -> Result<bool> {
        Ok(self.evaluate.adapt.unwrap_or(self.trainer()?.is_meta()))
    }

    /// Synthetic comparison built from every section.
    pub fn comparison(&self) -> Result<ComparisonConfig> {
        let pooled = self.plain_config()?;
        Ok(ComparisonConfig {
            data: self.synthetic_spec()?,
            model: self.model_config()?,
            meta: self.meta_config()?,
            schedule: self.schedule(),
            min_task_interactions: self.train.min_task_interactions,
            regularizer: self.regularizer()?,
            one_shop: pooled.clone(),
            pooled,
            one_shop_count: self.ablation.one_shop_count,
            negatives: self.negatives()?,
            targeting: self.targeting()?,
            thresholds: self.evaluate.thresholds.clone(),
        })
    }
}

/// Named ablation grids.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Ablation {
    OneShop,
    NegativeSampling,
    DebiasGamma,
    TaskUnit,
}

impl Ablation {
    pub fn from_name(s: &str) -> Option<Self> {
        match s {
            "one_shop" => Some(Ablation::OneShop),
            "negative_sampling" => Some(Ablation::NegativeSampling),
            "debias_gamma" => Some(Ablation::DebiasGamma),
            "task_unit" => Some(Ablation::TaskUnit),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Ablation::OneShop => "one_shop",
            Ablation::NegativeSampling => "negative_sampling",
            Ablation::DebiasGamma => "debias_gamma",
            Ablation::TaskUnit => "task_unit",
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_takes_defaults_but_needs_a_seed() {
        let cfg = RunConfig::from_toml("").unwrap();
        assert!(matches!(cfg.validate(), Err(Error::Config(m)) if m.contains("seed")));
        let cfg = RunConfig::from_toml("seed = 3").unwrap();
        cfg.validate().unwrap();
        assert_eq!(cfg.comparison().unwrap(), ComparisonConfig::default().with_seed(3));
    }

    #[test]
    fn echo_round_trips() {
        let mut cfg = RunConfig::from_toml("seed = 1\n[train]\ntrainer = \"fmst\"\nregularizer = \"option2\"\ngamma = 0.8").unwrap();
        cfg.data.train = Some("/tmp/x.csv".into());
        assert_eq!(RunConfig::from_toml(&cfg.to_toml()).unwrap(), cfg);
    }

    #[test]
    fn unknown_fields_and_names_are_config_errors() {
        assert!(RunConfig::from_toml("seed = 1\nsedd = 2").is_err());
        for text in [
            "seed = 1\n[train]\ntrainer = \"magic\"",
            "seed = 1\n[model]\nkind = \"cnn\"",
            "seed = 1\n[train]\ntrainer = \"fmst\"",
            "seed = 1\n[evaluate]\nmetrics = [\"auc\"]",
            "seed = 1\n[ablation]\nname = \"dropout\"",
            "seed = 1\n[data]\ntrain = \"/nonexistent/train.csv\"",
            "seed = 1\n[train]\ntrainer = \"baseline\"",
        ] {
            let cfg = RunConfig::from_toml(text).unwrap();
            assert!(matches!(cfg.validate(), Err(Error::Config(_))), "{text}");
        }
    }

    #[test]
    fn relative_paths_follow_the_file() {
        let mut cfg = RunConfig::from_toml("seed = 1\noutput_dir = \"o\"\n[data]\ntrain = \"t.csv\"\ntest = \"/abs/t.csv\"").unwrap();
        cfg.resolve_paths(Path::new("/runs/a"));
        assert_eq!(cfg.output_dir, Path::new("/runs/a/o"));
        assert_eq!(cfg.data.train.as_deref(), Some(Path::new("/runs/a/t.csv")));
        assert_eq!(cfg.data.test.as_deref(), Some(Path::new("/abs/t.csv")));
    }
}
