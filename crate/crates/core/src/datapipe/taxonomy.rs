use std::collections::{BTreeMap, BTreeSet};

use super::records::InteractionRecord;
use super::tasks::{ShopTask, SizeClass};

/// Evaluation class of a test shop.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ShopClass {
    New,
    SmallExisting,
    LargeExisting,
}

impl ShopClass {
    pub const ALL: [ShopClass; 3] = [ShopClass::New, ShopClass::SmallExisting, ShopClass::LargeExisting];

    pub fn name(self) -> &'static str {
        match self {
            ShopClass::New => "new",
            ShopClass::SmallExisting => "small",
            ShopClass::LargeExisting => "large",
        }
    }
}

/// Two shop-size partitions over the same sales counts.
///
/// * `taxonomy_class` (evaluation): test shops absent from training are
///   `New`; among the rest the top `ceil(25%)` by training sales are
///   `LargeExisting`, ties broken by lower shop id.
/// * `sampling_class` (negative sampling, fairness training): a shop is
///   `Small` when its training sales are strictly below the median training
///   sales over all training shops, otherwise `Large`.
#[derive(Debug, Clone, PartialEq)]
pub struct ShopTaxonomy {
    train_sales: BTreeMap<u64, u64>,
    classes: BTreeMap<u64, ShopClass>,
    median_sales: f64,
}

/// Sales are records with a positive label (purchases, or any rating).
fn sales(records: &[InteractionRecord]) -> BTreeMap<u64, u64> {
    let mut out = BTreeMap::new();
    for r in records {
        let e = out.entry(r.shop_id).or_insert(0);
        if r.label > 0.0 {
            *e += 1;
        }
    }
    out
}

fn median(values: &mut [u64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    values.sort_unstable();
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2] as f64
    } else {
        (values[n / 2 - 1] as f64 + values[n / 2] as f64) / 2.0
    }
}

pub fn classify_shops(train_records: &[InteractionRecord], test_records: &[InteractionRecord]) -> ShopTaxonomy {
    let train_sales = sales(train_records);
    let test_shops: BTreeSet<u64> = test_records.iter().map(|r| r.shop_id).collect();
    let mut existing: Vec<(u64, u64)> = test_shops
        .iter()
        .filter_map(|s| train_sales.get(s).map(|&n| (*s, n)))
        .collect();
    // most sales first, lower id first among equals
    existing.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
    let n_large = (existing.len() as f64 * 0.25).ceil() as usize;
    let mut classes: BTreeMap<u64, ShopClass> = test_shops.iter().map(|&s| (s, ShopClass::New)).collect();
    for (rank, (shop, _)) in existing.iter().enumerate() {
        let c = if rank < n_large {
            ShopClass::LargeExisting
        } else {
            ShopClass::SmallExisting
        };
        classes.insert(*shop, c);
    }
    let mut counts: Vec<u64> = train_sales.values().copied().collect();
    let median_sales = median(&mut counts);
    ShopTaxonomy {
        train_sales,
        classes,
        median_sales,
    }
}

impl ShopTaxonomy {
    pub fn taxonomy_class(&self, shop: u64) -> Option<ShopClass> {
        self.classes.get(&shop).copied()
    }

    /// Median-rule class; shops never seen in training count as zero sales.
    pub fn sampling_class(&self, shop: u64) -> SizeClass {
        if (self.train_sales(shop) as f64) < self.median_sales {
            SizeClass::Small
        } else {
            SizeClass::Large
        }
    }

    pub fn train_sales(&self, shop: u64) -> u64 {
        self.train_sales.get(&shop).copied().unwrap_or(0)
    }

    pub fn median_sales(&self) -> f64 {
        self.median_sales
    }

    pub fn test_classes(&self) -> &BTreeMap<u64, ShopClass> {
        &self.classes
    }

    pub fn training_shops(&self) -> impl Iterator<Item = u64> + '_ {
        self.train_sales.keys().copied()
    }

    /// Number of test shops in each class.
    pub fn counts(&self) -> BTreeMap<ShopClass, usize> {
        let mut out: BTreeMap<ShopClass, usize> = ShopClass::ALL.iter().map(|c| (*c, 0)).collect();
        for c in self.classes.values() {
            *out.entry(*c).or_default() += 1;
        }
        out
    }

    /// Relabels training tasks with their median-rule size class.
    pub fn label_tasks(&self, tasks: &mut [ShopTask]) {
        for t in tasks {
            t.size_class = self.sampling_class(t.shop_id);
        }
    }
}
