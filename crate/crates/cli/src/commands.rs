//! Command implementations. Every command validates its configuration and
//! loads its inputs before writing anything, and writes its manifest last.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use meshop::datapipe::{
    classify_shops, generate_synthetic, load_features, load_interactions, write_features, write_interactions, write_latents, FeatureLayout,
    FeatureStore, FeatureTable, InteractionRecord, NegativeStrategy, ShopTask, SizeClass, TaskUnit,
};
use meshop::experiment::{
    adapt_shops, baseline_targeting_metrics, init_baseline, init_model, rating_metrics, run_comparison, targeting_metrics, test_tasks, train_meta,
    train_pooled, with_sampled_negatives, ComparisonConfig, ShopModels,
};
use meshop::metaopt::{baseline_train, one_shop_train, RegularizerKind};
use meshop::metrics::{aggregate_report, EvaluationReport, MetricInput};
use meshop::models::{read_checkpoint, write_checkpoint, BaselineSample};
use meshop::{Error, FeatureEncoder, FeatureInput, ModelKind, ModelParameters, Result, TrainedModel};

use crate::config::{Ablation, RunConfig, TrainerKind};
use crate::output::{data_rows, float_array, write_atomic, Manifest};

fn required<'a>(p: &'a Option<PathBuf>, name: &str) -> Result<&'a Path> {
    p.as_deref().ok_or_else(|| Error::Config(format!("{name} is required for this command")))
}

fn load_store(cfg: &RunConfig) -> Result<FeatureStore> {
    Ok(FeatureStore {
        users: load_features(required(&cfg.data.user_features, "data.user_features")?)?,
        items: load_features(required(&cfg.data.item_features, "data.item_features")?)?,
    })
}

fn load_records(cfg: &RunConfig, path: &Option<PathBuf>, name: &str) -> Result<Vec<InteractionRecord>> {
    load_interactions(required(path, name)?, cfg.format())
}

fn records_csv(cfg: &RunConfig, records: &[InteractionRecord]) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    write_interactions(&mut buf, records, cfg.format())?;
    Ok(buf)
}

/// Writes `files` under `dir` and records them in `manifest`.
fn write_outputs(dir: &Path, files: &[(PathBuf, Vec<u8>)], manifest: &mut Manifest) -> Result<()> {
    for (path, bytes) in files {
        write_atomic(path, bytes)?;
        manifest.output(dir, path, data_rows(&String::from_utf8_lossy(bytes)));
    }
    Ok(())
}

/// Rejects parameters whose encoders do not fit the feature tables.
pub fn check_compatible(p: &ModelParameters, store: &FeatureStore) -> Result<()> {
    for (side, enc, table) in [("user", &p.user_encoder, &store.users), ("item", &p.item_encoder, &store.items)] {
        let fits = match (&table.layout, enc) {
            (FeatureLayout::Dense { dim }, FeatureEncoder::Pretrained { dim: d }) => dim == d,
            (FeatureLayout::Categorical { fields }, FeatureEncoder::Categorical { fields: f, .. }) => {
                fields.len() == f.len() && fields.iter().zip(f).all(|((_, v), e)| *v == e.vocab)
            }
            _ => false,
        };
        if !fits {
            return Err(Error::Config(format!("the {side} encoder does not match the {side} feature table")));
        }
    }
    Ok(())
}

fn read_model(path: &Path) -> Result<(ModelKind, TrainedModel)> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("cannot read checkpoint {}: {e}", path.display())))?;
    read_checkpoint(&text)
}

fn scoring(model: TrainedModel, path: &Path) -> Result<ModelParameters> {
    match model {
        TrainedModel::Scoring(p) => Ok(p),
        TrainedModel::Baseline(_) => Err(Error::Config(format!("{} holds the baseline, which has no scoring network", path.display()))),
    }
}

fn adapted_name(shop: u64) -> String {
    format!("shop-{shop}.ckpt")
}

// ------------------------------------------------------------------ gen-data

/// Shop sizes binned by powers of two: `(lower, upper, count)` with
/// `lower <= size < upper`.
pub fn size_histogram(sizes: &[usize]) -> Vec<(usize, usize, usize)> {
    let mut bins: BTreeMap<u32, usize> = BTreeMap::new();
    for &s in sizes.iter().filter(|&&s| s > 0) {
        *bins.entry(s.ilog2()).or_default() += 1;
    }
    bins.into_iter().map(|(b, n)| (1 << b, 1 << (b + 1), n)).collect()
}

/// Generates a synthetic dataset: interaction files, feature files and the
/// ground-truth latents.
pub fn gen_data(cfg: &RunConfig) -> Result<PathBuf> {
    cfg.validate()?;
    let data = generate_synthetic(&cfg.synthetic_spec()?)?;
    let store = data.feature_store()?;
    let dir = &cfg.output_dir;
    let features = |t: &FeatureTable| -> Result<Vec<u8>> {
        let mut buf = Vec::new();
        write_features(&mut buf, t)?;
        Ok(buf)
    };
    let users = features(&store.users)?;
    let items = features(&store.items)?;
    let mut latents = Vec::new();
    write_latents(&mut latents, &data.latents)?;
    let files = vec![
        (dir.join("train.csv"), records_csv(cfg, &data.train)?),
        (dir.join("test.csv"), records_csv(cfg, &data.test)?),
        (dir.join("users.csv"), users),
        (dir.join("items.csv"), items),
    ];

    let mut m = Manifest::new("gen-data", cfg);
    write_outputs(dir, &files, &mut m)?;
    let latents_path = dir.join("latents.csv");
    write_atomic(&latents_path, &latents)?;
    m.output(dir, &latents_path, data_rows(&String::from_utf8_lossy(&latents)));

    let mut per_shop: BTreeMap<u64, (usize, usize)> = BTreeMap::new();
    for r in &data.train {
        per_shop.entry(r.shop_id).or_default().0 += 1;
    }
    for r in &data.test {
        per_shop.entry(r.shop_id).or_default().1 += 1;
    }
    let mut shops = toml::Table::new();
    shops.insert("id".into(), per_shop.keys().map(|&s| toml::Value::from(s as i64)).collect::<Vec<_>>().into());
    shops.insert("train".into(), per_shop.values().map(|c| toml::Value::from(c.0 as i64)).collect::<Vec<_>>().into());
    shops.insert("test".into(), per_shop.values().map(|c| toml::Value::from(c.1 as i64)).collect::<Vec<_>>().into());
    shops.insert("new".into(), data.new_shops.iter().map(|&s| toml::Value::from(s as i64)).collect::<Vec<_>>().into());
    m.set("shops", shops);
    let sizes: Vec<usize> = per_shop.values().map(|c| c.0 + c.1).collect();
    let hist = size_histogram(&sizes);
    let mut h = toml::Table::new();
    h.insert("lower".into(), hist.iter().map(|b| toml::Value::from(b.0 as i64)).collect::<Vec<_>>().into());
    h.insert("upper".into(), hist.iter().map(|b| toml::Value::from(b.1 as i64)).collect::<Vec<_>>().into());
    h.insert("count".into(), hist.iter().map(|b| toml::Value::from(b.2 as i64)).collect::<Vec<_>>().into());
    m.set("size_histogram", h);
    m.write(dir)
}

// --------------------------------------------------------------------- train

/// User id to the item ids of the user's positive records.
pub fn purchase_histories(records: &[InteractionRecord]) -> BTreeMap<u64, Vec<u64>> {
    let mut h: BTreeMap<u64, Vec<u64>> = BTreeMap::new();
    for r in records.iter().filter(|r| r.label > 0.0) {
        h.entry(r.user_id).or_default().push(r.item_id);
    }
    h
}

fn train_baseline(cfg: &RunConfig, store: &FeatureStore, train: &[InteractionRecord]) -> Result<(TrainedModel, Vec<f64>)> {
    let FeatureLayout::Dense { dim } = store.items.layout else {
        return Err(Error::Config("the baseline needs dense item features".into()));
    };
    let histories = purchase_histories(train);
    let feats: BTreeMap<u64, Vec<&FeatureInput>> = histories
        .iter()
        .map(|(&u, items)| Ok((u, items.iter().map(|&i| store.item(i)).collect::<Result<Vec<_>>>()?)))
        .collect::<Result<_>>()?;
    let samples = train
        .iter()
        .filter_map(|r| feats.get(&r.user_id).map(|h| (r, h)))
        .map(|(r, h)| {
            Ok(BaselineSample {
                history: h,
                item: store.item(r.item_id)?,
                positive: r.label > 0.0,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    if !samples.iter().any(|s| !s.positive) {
        return Err(Error::Config("the baseline needs negative records; set train.negatives".into()));
    }
    let init = init_baseline(dim, &cfg.model.hidden, cfg.model.margin, cfg.model.neg_weight, cfg.seed()?)?;
    let out = baseline_train(&init, &samples, &cfg.plain_config()?)?;
    Ok((TrainedModel::Baseline(out.params), out.epoch_losses))
}

/// Trains the configured model and writes `model.ckpt`.
///
/// Meta-trainers log one loss per meta-step, the others one per epoch.
pub fn train(cfg: &RunConfig, init: Option<&Path>) -> Result<PathBuf> {
    cfg.validate()?;
    let trainer = cfg.trainer()?;
    let kind = cfg.model_kind()?;
    let store = load_store(cfg)?;
    let mut train = load_records(cfg, &cfg.data.train, "data.train")?;
    let test = match &cfg.data.test {
        Some(_) => load_records(cfg, &cfg.data.test, "data.test")?,
        None => Vec::new(),
    };
    let support = match &cfg.data.support {
        Some(_) => load_records(cfg, &cfg.data.support, "data.support")?,
        None => Vec::new(),
    };
    let taxonomy = classify_shops(&train, &test);
    if let Some((strategy, ratio)) = cfg.negatives()? {
        train = with_sampled_negatives(&train, strategy, &taxonomy, ratio, cfg.seed()?)?;
    }
    let start = match init {
        Some(path) => {
            let (k, model) = read_model(path)?;
            if k != kind {
                return Err(Error::Config(format!("initial checkpoint is `{}`, config says `{}`", k.name(), kind.name())));
            }
            let p = scoring(model, path)?;
            check_compatible(&p, &store)?;
            Some(p)
        }
        None if kind == ModelKind::Baseline => None,
        None => Some(init_model(&cfg.model_config()?, &store, cfg.seed()?)?),
    };

    let mut m = Manifest::new("train", cfg);
    let (model, losses, unit) = match (trainer, start) {
        (TrainerKind::Meta | TrainerKind::Fmst, Some(p)) => {
            let reg = if trainer == TrainerKind::Fmst { cfg.regularizer()? } else { None };
            let out = train_meta(&p, &train, &store, &taxonomy, &cfg.meta_config()?, cfg.schedule(), cfg.train.min_task_interactions, reg)?;
            m.set("stopped_early", out.stopped_early);
            let losses: Vec<f64> = out.trace.iter().map(|s| s.loss).collect();
            (TrainedModel::Scoring(out.params), losses, "meta_step")
        }
        (TrainerKind::NonMeta, Some(p)) => {
            let out = train_pooled(&p, &train, &store, &cfg.plain_config()?)?;
            (TrainedModel::Scoring(out.params), out.epoch_losses, "epoch")
        }
        (TrainerKind::OneShop, Some(p)) => {
            let shop = cfg.train.shop.ok_or_else(|| Error::Config("trainer `one_shop` needs train.shop".into()))?;
            let recs: Vec<InteractionRecord> = train.iter().chain(&support).filter(|r| r.shop_id == shop).cloned().collect();
            let out = one_shop_train(&p, &store.examples(&recs)?, &cfg.plain_config()?)?;
            m.set("shop_records", recs.len() as i64);
            (TrainedModel::Scoring(out.params), out.epoch_losses, "epoch")
        }
        (TrainerKind::Baseline, _) => {
            let (model, losses) = train_baseline(cfg, &store, &train)?;
            (model, losses, "epoch")
        }
        (_, None) => unreachable!("scoring trainers always have initial parameters"),
    };
    let ckpt = cfg.output_dir.join("model.ckpt");
    write_atomic(&ckpt, write_checkpoint(kind, &model)?.as_bytes())?;
    m.output(&cfg.output_dir, &ckpt, 1);
    m.set("loss_unit", unit);
    m.set("losses", float_array(&losses));
    m.write(&cfg.output_dir)
}

// --------------------------------------------------------------------- adapt

/// Adapts a meta-trained checkpoint to each shop of the support file and
/// writes one checkpoint per shop under `adapted/`.
pub fn adapt(cfg: &RunConfig, checkpoint: &Path, shops: Option<&[u64]>) -> Result<PathBuf> {
    cfg.validate()?;
    let store = load_store(cfg)?;
    let support = load_records(cfg, &cfg.data.support, "data.support")?;
    let (kind, model) = read_model(checkpoint)?;
    let theta = scoring(model, checkpoint)?;
    check_compatible(&theta, &store)?;
    let mut by_shop: BTreeMap<u64, Vec<InteractionRecord>> = BTreeMap::new();
    for r in support {
        by_shop.entry(r.shop_id).or_default().push(r);
    }
    let wanted: Vec<u64> = match shops {
        Some(s) => s.to_vec(),
        None => by_shop.keys().copied().collect(),
    };
    let tasks: Vec<ShopTask> = wanted
        .iter()
        .map(|&shop| ShopTask {
            shop_id: shop,
            support: by_shop.get(&shop).cloned().unwrap_or_default(),
            query: Vec::new(),
            // adaptation ignores the size class
            size_class: SizeClass::Small,
        })
        .collect();
    let adapted = adapt_shops(&theta, &tasks, &store, &cfg.meta_config()?)?;

    let dir = cfg.output_dir.join("adapted");
    let mut m = Manifest::new("adapt", cfg);
    m.set("checkpoint", checkpoint.to_string_lossy().into_owned());
    for (shop, p) in &adapted {
        let path = dir.join(adapted_name(*shop));
        write_atomic(&path, write_checkpoint(kind, &TrainedModel::Scoring(p.clone()))?.as_bytes())?;
        m.output(&cfg.output_dir, &path, by_shop[shop].len());
    }
    m.write(&cfg.output_dir)
}

// ------------------------------------------------------------------ evaluate

/// Scores the test shops with a checkpoint and writes `summary.tsv`,
/// `shops.tsv` and `report.kv`.
///
/// Test shops are split into a support set of `train.support_size` records
/// and a query set. Per-shop parameters come from `adapted` when given,
/// otherwise from adapting the checkpoint on each support set when
/// adaptation is enabled, otherwise the checkpoint scores every shop.
pub fn evaluate(cfg: &RunConfig, checkpoint: &Path, adapted: Option<&Path>) -> Result<PathBuf> {
    cfg.validate()?;
    let store = load_store(cfg)?;
    let train = load_records(cfg, &cfg.data.train, "data.train")?;
    let test = load_records(cfg, &cfg.data.test, "data.test")?;
    let (kind, model) = read_model(checkpoint)?;
    let taxonomy = classify_shops(&train, &test);
    let (mut tasks, skipped) = test_tasks(&test, cfg.train.support_size, cfg.seed()?)?;
    if tasks.is_empty() {
        return Err(Error::EmptyBatch("test shops with more records than the support size"));
    }
    taxonomy.label_tasks(&mut tasks);
    let users: Vec<u64> = store.users.rows.keys().copied().collect();
    let opts = cfg.targeting()?;

    let mut inputs: BTreeMap<String, MetricInput> = BTreeMap::new();
    match model {
        TrainedModel::Baseline(b) => {
            if cfg.evaluate.metrics.iter().any(|m| m != "recall") {
                return Err(Error::Config("the baseline only supports the recall metric".into()));
            }
            let histories = purchase_histories(&train);
            inputs.insert("recall".into(), baseline_targeting_metrics(&b, &histories, &tasks, &store, &users, opts)?);
        }
        TrainedModel::Scoring(theta) => {
            check_compatible(&theta, &store)?;
            let per_shop = match adapted {
                Some(dir) => Some(load_adapted(dir, &tasks, kind, &store)?),
                None if cfg.adapt_on_evaluate()? => Some(adapt_shops(&theta, &tasks, &store, &cfg.meta_config()?)?),
                None => None,
            };
            let models = match &per_shop {
                Some(map) => ShopModels::PerShop(map),
                None => ShopModels::Shared(&theta),
            };
            if cfg.evaluate.metrics.iter().any(|m| m == "recall") {
                inputs.insert("recall".into(), targeting_metrics(models, &tasks, &store, &users, opts)?);
            }
            let rating_wanted = |name: &str| cfg.evaluate.metrics.iter().any(|m| m == name);
            if rating_wanted("ndcg") || rating_wanted("mae") {
                for (name, input) in rating_metrics(models, &tasks, &store, &cfg.objective()?, &cfg.evaluate.ndcg_ks)? {
                    if rating_wanted(if name == "mae" { "mae" } else { "ndcg" }) {
                        inputs.insert(name, input);
                    }
                }
            }
        }
    }
    let report = aggregate_report(inputs, &taxonomy, &cfg.evaluate.thresholds)?;
    write_report(cfg, "evaluate", &report, |m| {
        m.set("checkpoint", checkpoint.to_string_lossy().into_owned());
        m.set("evaluated_shops", tasks.len() as i64);
        m.set("skipped_shops", skipped.iter().map(|&s| toml::Value::from(s as i64)).collect::<Vec<_>>());
    })
}

fn load_adapted(dir: &Path, tasks: &[ShopTask], kind: ModelKind, store: &FeatureStore) -> Result<BTreeMap<u64, ModelParameters>> {
    tasks
        .iter()
        .map(|t| {
            let path = dir.join(adapted_name(t.shop_id));
            if !path.is_file() {
                return Err(Error::Unknown {
                    kind: "adapted checkpoint",
                    id: path.display().to_string(),
                });
            }
            let (k, model) = read_model(&path)?;
            if k != kind {
                return Err(Error::Config(format!("{} is `{}`, expected `{}`", path.display(), k.name(), kind.name())));
            }
            let p = scoring(model, &path)?;
            check_compatible(&p, store)?;
            Ok((t.shop_id, p))
        })
        .collect()
}

fn write_report(cfg: &RunConfig, command: &str, report: &EvaluationReport, extra: impl FnOnce(&mut Manifest)) -> Result<PathBuf> {
    let dir = &cfg.output_dir;
    let files = vec![
        (dir.join("summary.tsv"), report.summary_table().into_bytes()),
        (dir.join("shops.tsv"), report.shop_table().into_bytes()),
    ];
    let mut m = Manifest::new(command, cfg);
    write_outputs(dir, &files, &mut m)?;
    let kv = dir.join("report.kv");
    let text = report.key_values();
    write_atomic(&kv, text.as_bytes())?;
    m.output(dir, &kv, text.lines().count());
    extra(&mut m);
    m.write(dir)
}

// -------------------------------------------------------------------- report

/// Fields shown by [`report`], in order.
pub const REPORT_FIELDS: [&str; 4] = ["n_shops", "item_level", "shop_mean", "shop_variance"];

fn parse_kv(path: &Path) -> Result<BTreeMap<String, String>> {
    let text = std::fs::read_to_string(path)?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(n, l)| {
            l.split_once('=')
                .map(|(k, v)| (k.to_string(), v.to_string()))
                .ok_or_else(|| Error::Load {
                    path: path.to_path_buf(),
                    line: n as u64 + 1,
                    message: "expected key=value".into(),
                })
        })
        .collect()
}

/// Side-by-side table of evaluation runs: one row per metric, scope and
/// field, one column per run. `runs` are run directories or `report.kv`
/// files.
pub fn report(runs: &[PathBuf], metric: Option<&str>) -> Result<String> {
    if runs.is_empty() {
        return Err(Error::Config("report needs at least one run".into()));
    }
    let tables = runs
        .iter()
        .map(|r| parse_kv(&if r.is_dir() { r.join("report.kv") } else { r.clone() }))
        .collect::<Result<Vec<_>>>()?;
    let mut rows: Vec<(String, String, &str)> = Vec::new();
    for table in &tables {
        for key in table.keys() {
            let mut parts = key.splitn(3, '.');
            let (Some(m), Some(scope), Some(field)) = (parts.next(), parts.next(), parts.next()) else {
                continue;
            };
            if metric.is_some_and(|want| want != m) {
                continue;
            }
            if let Some(f) = REPORT_FIELDS.iter().find(|f| **f == field) {
                let row = (m.to_string(), scope.to_string(), *f);
                if !rows.contains(&row) {
                    rows.push(row);
                }
            }
        }
    }
    let scope_rank = |s: &str| ["overall", "new", "small", "large"].iter().position(|x| *x == s).unwrap_or(4);
    let field_rank = |f: &str| REPORT_FIELDS.iter().position(|x| *x == f).unwrap_or(4);
    rows.sort_by(|a, b| a.0.cmp(&b.0).then(scope_rank(&a.1).cmp(&scope_rank(&b.1))).then(field_rank(a.2).cmp(&field_rank(b.2))));
    let mut out = String::from("metric\tscope\tfield");
    for r in runs {
        let _ = write!(out, "\t{}", r.display());
    }
    out.push('\n');
    for (m, scope, field) in rows {
        let _ = write!(out, "{m}\t{scope}\t{field}");
        for t in &tables {
            let _ = write!(out, "\t{}", t.get(&format!("{m}.{scope}.{field}")).map_or("-", String::as_str));
        }
        out.push('\n');
    }
    Ok(out)
}

// ------------------------------------------------------------------ ablation

fn ablation_rows(cfg: &RunConfig, which: Ablation) -> Result<Vec<(String, EvaluationReport)>> {
    let base = ComparisonConfig {
        one_shop_count: 0,
        ..cfg.comparison()?
    };
    match which {
        Ablation::OneShop => {
            if cfg.ablation.one_shop_count == 0 {
                return Err(Error::Config("ablation.one_shop_count must be positive".into()));
            }
            let out = run_comparison(&ComparisonConfig {
                one_shop_count: cfg.ablation.one_shop_count,
                ..base
            })?;
            let one = out.one_shop.expect("one-shop arm requested");
            Ok(vec![("mesh".into(), one.mesh), ("one_shop".into(), one.one_shop)])
        }
        Ablation::NegativeSampling => [NegativeStrategy::N0, NegativeStrategy::N1, NegativeStrategy::N2]
            .into_iter()
            .map(|s| {
                let mut c = base.clone();
                c.negatives = Some((s, cfg.train.negative_ratio));
                Ok((s.name().to_string(), run_comparison(&c)?.mesh))
            })
            .collect(),
        Ablation::DebiasGamma => {
            let reg = RegularizerKind::from_name(&cfg.ablation.regularizer)
                .ok_or_else(|| Error::Config(format!("unknown ablation.regularizer `{}`", cfg.ablation.regularizer)))?;
            cfg.ablation
                .gammas
                .iter()
                .map(|&g| {
                    let mut c = base.clone();
                    c.meta.gamma = g;
                    c.regularizer = Some(reg);
                    Ok((format!("gamma={g}"), run_comparison(&c)?.mesh))
                })
                .collect()
        }
        Ablation::TaskUnit => [TaskUnit::Shop, TaskUnit::Item, TaskUnit::User]
            .into_iter()
            .map(|u| {
                let mut c = base.clone();
                c.meta.task_unit = u;
                Ok((u.name().to_string(), run_comparison(&c)?.mesh))
            })
            .collect(),
    }
}

/// Rows of an ablation table: one line per (row, metric, scope).
pub fn ablation_table(rows: &[(String, EvaluationReport)]) -> String {
    let mut out = String::from("row\tmetric\tscope\tn_shops\titem_level\tshop_mean\tshop_variance\n");
    for (label, report) in rows {
        for (metric, block) in &report.metrics {
            let scopes = std::iter::once(("overall", &block.overall)).chain(block.by_class.iter().map(|(c, a)| (c.name(), a)));
            for (scope, a) in scopes {
                let _ = writeln!(
                    out,
                    "{label}\t{metric}\t{scope}\t{}\t{}\t{}\t{}",
                    a.per_shop.len(),
                    a.item_level,
                    a.shop_mean,
                    a.shop_variance
                );
            }
        }
    }
    out
}

/// Runs a named ablation grid on synthetic data from the `[synthetic]`
/// section and writes `ablation.tsv`.
pub fn ablation(cfg: &RunConfig) -> Result<(PathBuf, String)> {
    cfg.validate()?;
    let name = cfg.ablation.name.as_deref().ok_or_else(|| Error::Config("ablation.name is required".into()))?;
    let which = Ablation::from_name(name).ok_or_else(|| Error::Config(format!("unknown ablation `{name}`")))?;
    let rows = ablation_rows(cfg, which)?;
    let table = ablation_table(&rows);
    let path = cfg.output_dir.join("ablation.tsv");
    let mut m = Manifest::new("ablation", cfg);
    write_atomic(&path, table.as_bytes())?;
    m.output(&cfg.output_dir, &path, data_rows(&table));
    m.set("ablation", which.name());
    m.set("rows", rows.iter().map(|(l, _)| toml::Value::from(l.as_str())).collect::<Vec<_>>());
    m.write(&cfg.output_dir)?;
    Ok((path, table))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn histogram_bins_cover_every_shop() {
        let sizes = [40, 63, 64, 200, 1];
        let h = size_histogram(&sizes);
        assert_eq!(h, vec![(1, 2, 1), (32, 64, 2), (64, 128, 1), (128, 256, 1)]);
        for s in sizes {
            assert_eq!(h.iter().filter(|b| b.0 <= s && s < b.1).count(), 1);
        }
    }

    #[test]
    fn histories_keep_positive_purchases() {
        let recs = vec![
            InteractionRecord::new(1, 10, 0, 1.0),
            InteractionRecord::new(1, 11, 0, 0.0),
            InteractionRecord::new(2, 12, 0, 1.0),
        ];
        assert_eq!(purchase_histories(&recs), BTreeMap::from([(1, vec![10]), (2, vec![12])]));
    }

    #[test]
    fn report_aligns_runs_by_key() {
        let dir = tempfile::tempdir().unwrap();
        let a = dir.path().join("a.kv");
        let b = dir.path().join("b.kv");
        std::fs::write(&a, "recall.overall.shop_mean=0.5\nrecall.new.shop_mean=0.25\nrecall.undefined=0\n").unwrap();
        std::fs::write(&b, "recall.overall.shop_mean=0.75\n").unwrap();
        let t = report(&[a, b], None).unwrap();
        let lines: Vec<&str> = t.lines().collect();
        assert_eq!(lines.len(), 3);
        assert!(lines[1].starts_with("recall\toverall\tshop_mean\t0.5\t0.75"));
        assert!(lines[2].ends_with("\t0.25\t-"));
    }
}
