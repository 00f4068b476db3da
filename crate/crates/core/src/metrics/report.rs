use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::datapipe::{ShopClass, ShopTaxonomy};
use crate::error::{Error, Result};

pub const DEFAULT_THRESHOLDS: [f64; 4] = [0.5, 0.6, 0.7, 0.8];

/// One per-query metric value attributed to a shop.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QueryMetric {
    pub query_id: u64,
    pub shop_id: u64,
    pub value: f64,
}

/// Item-level and shop-level view of one metric over a set of queries.
#[derive(Debug, Clone, PartialEq)]
pub struct Aggregate {
    pub n_queries: usize,
    /// Unweighted mean over queries.
    pub item_level: f64,
    /// Unweighted mean over shops of within-shop means.
    pub shop_mean: f64,
    /// Population variance of the per-shop values.
    pub shop_variance: f64,
    pub per_shop: BTreeMap<u64, (f64, usize)>,
    /// `(threshold, share of shops with value >= threshold)`.
    pub exceedance: Vec<(f64, f64)>,
}

pub fn aggregate(metrics: &[QueryMetric], thresholds: &[f64]) -> Result<Aggregate> {
    if metrics.is_empty() {
        return Err(Error::EmptyBatch("aggregate over zero queries"));
    }
    let mut sums: BTreeMap<u64, (f64, usize)> = BTreeMap::new();
    for m in metrics {
        let e = sums.entry(m.shop_id).or_default();
        e.0 += m.value;
        e.1 += 1;
    }
    let per_shop: BTreeMap<u64, (f64, usize)> = sums.into_iter().map(|(s, (t, n))| (s, (t / n as f64, n))).collect();
    let n_shops = per_shop.len() as f64;
    let shop_mean = per_shop.values().map(|v| v.0).sum::<f64>() / n_shops;
    let shop_variance = per_shop.values().map(|v| (v.0 - shop_mean).powi(2)).sum::<f64>() / n_shops;
    let exceedance = thresholds
        .iter()
        .map(|&t| (t, per_shop.values().filter(|v| v.0 >= t).count() as f64 / n_shops))
        .collect();
    Ok(Aggregate {
        n_queries: metrics.len(),
        item_level: metrics.iter().map(|m| m.value).sum::<f64>() / metrics.len() as f64,
        shop_mean,
        shop_variance,
        per_shop,
        exceedance,
    })
}

/// One metric over all test shops and per shop class.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricBlock {
    pub overall: Aggregate,
    pub by_class: BTreeMap<ShopClass, Aggregate>,
    /// Queries whose metric was undefined and left out.
    pub undefined: usize,
    /// Queries whose value was defined by convention (zero ideal gain).
    pub degenerate: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricInput {
    pub values: Vec<QueryMetric>,
    pub undefined: usize,
    pub degenerate: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvaluationReport {
    pub thresholds: Vec<f64>,
    pub metrics: BTreeMap<String, MetricBlock>,
    pub shop_classes: BTreeMap<u64, ShopClass>,
}

/// Aggregates per-query metrics by level and by taxonomy class.
pub fn aggregate_report(
    per_metric: BTreeMap<String, MetricInput>,
    taxonomy: &ShopTaxonomy,
    thresholds: &[f64],
) -> Result<EvaluationReport> {
    let mut metrics = BTreeMap::new();
    let mut shop_classes = BTreeMap::new();
    for (name, input) in per_metric {
        let mut grouped: BTreeMap<ShopClass, Vec<QueryMetric>> = BTreeMap::new();
        for m in &input.values {
            let class = taxonomy.taxonomy_class(m.shop_id).ok_or_else(|| Error::Unknown {
                kind: "shop",
                id: m.shop_id.to_string(),
            })?;
            shop_classes.insert(m.shop_id, class);
            grouped.entry(class).or_default().push(*m);
        }
        let by_class = grouped
            .into_iter()
            .map(|(c, v)| aggregate(&v, thresholds).map(|a| (c, a)))
            .collect::<Result<_>>()?;
        metrics.insert(
            name,
            MetricBlock {
                overall: aggregate(&input.values, thresholds)?,
                by_class,
                undefined: input.undefined,
                degenerate: input.degenerate,
            },
        );
    }
    Ok(EvaluationReport {
        thresholds: thresholds.to_vec(),
        metrics,
        shop_classes,
    })
}

fn scopes(block: &MetricBlock) -> Vec<(&'static str, &Aggregate)> {
    let mut out = vec![("all", &block.overall)];
    for (c, a) in &block.by_class {
        out.push((c.name(), a));
    }
    out
}

impl EvaluationReport {
    /// Tab-separated summary: one row per metric and scope.
    ///
    /// Columns: `metric scope n_shops n_queries item_level shop_mean
    /// shop_variance ge_<t>...`.
    pub fn summary_table(&self) -> String {
        let mut out = String::from("metric\tscope\tn_shops\tn_queries\titem_level\tshop_mean\tshop_variance");
        for t in &self.thresholds {
            let _ = write!(out, "\tge_{t}");
        }
        out.push('\n');
        for (name, block) in &self.metrics {
            for (scope, a) in scopes(block) {
                let _ = write!(
                    out,
                    "{name}\t{scope}\t{}\t{}\t{}\t{}\t{}",
                    a.per_shop.len(),
                    a.n_queries,
                    a.item_level,
                    a.shop_mean,
                    a.shop_variance
                );
                for (_, f) in &a.exceedance {
                    let _ = write!(out, "\t{f}");
                }
                out.push('\n');
            }
        }
        out
    }

    /// Tab-separated per-shop values: `metric shop_id class value n_queries`.
    pub fn shop_table(&self) -> String {
        let mut out = String::from("metric\tshop_id\tclass\tvalue\tn_queries\n");
        for (name, block) in &self.metrics {
            for (shop, (v, n)) in &block.overall.per_shop {
                let class = self.shop_classes.get(shop).map_or("unknown", |c| c.name());
                let _ = writeln!(out, "{name}\t{shop}\t{class}\t{v}\t{n}");
            }
        }
        out
    }

    /// `key=value` lines, keys `<metric>.<scope>.<field>`.
    pub fn key_values(&self) -> String {
        let mut out = String::new();
        for (name, block) in &self.metrics {
            let _ = writeln!(out, "{name}.undefined={}", block.undefined);
            let _ = writeln!(out, "{name}.degenerate={}", block.degenerate);
            for (scope, a) in scopes(block) {
                let _ = writeln!(out, "{name}.{scope}.n_shops={}", a.per_shop.len());
                let _ = writeln!(out, "{name}.{scope}.item_level={}", a.item_level);
                let _ = writeln!(out, "{name}.{scope}.shop_mean={}", a.shop_mean);
                let _ = writeln!(out, "{name}.{scope}.shop_variance={}", a.shop_variance);
                for (t, f) in &a.exceedance {
                    let _ = writeln!(out, "{name}.{scope}.ge_{t}={f}");
                }
            }
        }
        out
    }
}
