use std::collections::BTreeMap;

use rand::seq::index;

use super::records::InteractionRecord;
use crate::error::{Error, Result};
use crate::rng;

pub const DEFAULT_MIN_INTERACTIONS: usize = 13;
pub const DEFAULT_SUPPORT_SIZE: usize = 10;

/// What one meta-learning task is keyed on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TaskUnit {
    Shop,
    Item,
    User,
}

impl TaskUnit {
    pub fn key(self, r: &InteractionRecord) -> u64 {
        match self {
            TaskUnit::Shop => r.shop_id,
            TaskUnit::Item => r.item_id,
            TaskUnit::User => r.user_id,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            TaskUnit::Shop => "shop",
            TaskUnit::Item => "item",
            TaskUnit::User => "user",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        match s {
            "shop" => Some(TaskUnit::Shop),
            "item" => Some(TaskUnit::Item),
            "user" => Some(TaskUnit::User),
            _ => None,
        }
    }
}

/// Size class used by fairness-aware training.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SizeClass {
    Small,
    Large,
    New,
}

/// One task: disjoint support and query interactions of a shop (or of the
/// item/user when tasks are keyed differently).
///
/// `shop_id` holds the task key. Tasks come out of [`build_tasks`] as
/// `SizeClass::Small` until relabelled from a taxonomy.
#[derive(Debug, Clone, PartialEq)]
pub struct ShopTask {
    pub shop_id: u64,
    pub support: Vec<InteractionRecord>,
    pub query: Vec<InteractionRecord>,
    pub size_class: SizeClass,
}

impl ShopTask {
    pub fn len(&self) -> usize {
        self.support.len() + self.query.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// All records of the task, support first.
    pub fn records(&self) -> impl Iterator<Item = &InteractionRecord> {
        self.support.iter().chain(&self.query)
    }
}

/// Groups records by `unit`, keeps groups with at least `min_interactions`
/// records and draws `support_size` of them uniformly without replacement
/// into the support set; the remainder form the query set.
///
/// Each group uses its own seeded stream, so the split of one group does not
/// depend on which other groups are present. Output is ordered by key.
pub fn build_tasks_by(
    records: &[InteractionRecord],
    unit: TaskUnit,
    min_interactions: usize,
    support_size: usize,
    seed: u64,
) -> Result<Vec<ShopTask>> {
    if support_size == 0 {
        return Err(Error::Config("support size must be positive".into()));
    }
    if support_size >= min_interactions {
        return Err(Error::Config(format!(
            "support size {support_size} must be below the minimum interaction count {min_interactions}"
        )));
    }
    let mut groups: BTreeMap<u64, Vec<&InteractionRecord>> = BTreeMap::new();
    for r in records {
        groups.entry(unit.key(r)).or_default().push(r);
    }
    let mut tasks = Vec::new();
    for (key, recs) in groups {
        if recs.len() < min_interactions {
            continue;
        }
        let mut r = rng::stream(seed, key);
        let mut chosen = index::sample(&mut r, recs.len(), support_size).into_vec();
        chosen.sort_unstable();
        let mut in_support = vec![false; recs.len()];
        for &c in &chosen {
            in_support[c] = true;
        }
        let support = chosen.iter().map(|&c| recs[c].clone()).collect();
        let query = recs
            .iter()
            .zip(&in_support)
            .filter(|(_, s)| !**s)
            .map(|(r, _)| (*r).clone())
            .collect();
        tasks.push(ShopTask {
            shop_id: key,
            support,
            query,
            size_class: SizeClass::Small,
        });
    }
    Ok(tasks)
}

/// Shop-keyed [`build_tasks_by`].
pub fn build_tasks(records: &[InteractionRecord], min_interactions: usize, support_size: usize, seed: u64) -> Result<Vec<ShopTask>> {
    build_tasks_by(records, TaskUnit::Shop, min_interactions, support_size, seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn shop(shop_id: u64, n: usize) -> Vec<InteractionRecord> {
        (0..n as u64).map(|i| InteractionRecord::new(i, 100 + i, shop_id, 1.0)).collect()
    }

    #[test]
    fn exactly_thirteen_splits_ten_three() {
        let t = build_tasks(&shop(1, 13), 13, 10, 0).unwrap();
        assert_eq!(t.len(), 1);
        assert_eq!((t[0].support.len(), t[0].query.len()), (10, 3));
    }

    #[test]
    fn twelve_records_excluded() {
        assert!(build_tasks(&shop(1, 12), 13, 10, 0).unwrap().is_empty());
    }

    #[test]
    fn fixed_seed_reproduces_split() {
        let mut recs = shop(1, 40);
        recs.extend(shop(2, 25));
        assert_eq!(build_tasks(&recs, 13, 10, 9).unwrap(), build_tasks(&recs, 13, 10, 9).unwrap());
        assert_ne!(build_tasks(&recs, 13, 10, 9).unwrap(), build_tasks(&recs, 13, 10, 10).unwrap());
    }

    #[test]
    fn support_not_below_minimum_is_config_error() {
        assert!(matches!(build_tasks(&shop(1, 20), 10, 10, 0), Err(Error::Config(_))));
    }

    #[test]
    fn group_split_independent_of_other_groups() {
        let a = build_tasks(&shop(1, 30), 13, 10, 4).unwrap();
        let mut both = shop(1, 30);
        both.extend(shop(2, 50));
        let b = build_tasks(&both, 13, 10, 4).unwrap();
        assert_eq!(a[0], b[0]);
    }

    #[test]
    fn item_unit_groups_by_item() {
        let recs: Vec<_> = (0..30u64).map(|u| InteractionRecord::new(u, u % 2, 5, 1.0)).collect();
        let t = build_tasks_by(&recs, TaskUnit::Item, 13, 10, 0).unwrap();
        assert_eq!(t.iter().map(|t| t.shop_id).collect::<Vec<_>>(), vec![0, 1]);
    }

    proptest! {
        #[test]
        fn support_and_query_partition_each_shop(
            sizes in prop::collection::vec(0usize..60, 1..8),
            seed in any::<u64>(),
        ) {
            let mut recs = Vec::new();
            for (s, &n) in sizes.iter().enumerate() {
                recs.extend(shop(s as u64, n));
            }
            let tasks = build_tasks(&recs, 13, 10, seed).unwrap();
            prop_assert_eq!(tasks.len(), sizes.iter().filter(|&&n| n >= 13).count());
            for t in &tasks {
                prop_assert_eq!(t.support.len(), 10);
                let mut all: Vec<u64> = t.records().map(|r| r.user_id).collect();
                all.sort_unstable();
                let n = sizes[t.shop_id as usize] as u64;
                prop_assert_eq!(all, (0..n).collect::<Vec<_>>());
            }
        }
    }
}
