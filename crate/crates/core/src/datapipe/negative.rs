use std::collections::{BTreeMap, BTreeSet, HashSet};

use rand::Rng as _;

use super::records::InteractionRecord;
use super::tasks::SizeClass;
use super::taxonomy::ShopTaxonomy;
use crate::error::{Error, Result};
use crate::rng;

/// Where a negative user is drawn from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum NegativeStrategy {
    /// Users who purchased in a genre other than the item's.
    N0,
    /// Fair coin between small-shop purchasers and the `N0` pool.
    N1,
    /// `N0` for items of large shops, `N1` for items of small shops.
    N2,
}

impl NegativeStrategy {
    pub fn name(self) -> &'static str {
        match self {
            NegativeStrategy::N0 => "n0",
            NegativeStrategy::N1 => "n1",
            NegativeStrategy::N2 => "n2",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        match s.to_ascii_lowercase().as_str() {
            "n0" => Some(NegativeStrategy::N0),
            "n1" => Some(NegativeStrategy::N1),
            "n2" => Some(NegativeStrategy::N2),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum NegativeBranch {
    OtherGenre,
    SmallShop,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SampledNegative {
    pub record: InteractionRecord,
    pub branch: NegativeBranch,
}

/// Draws without a pool check before falling back to the filtered pool.
const REJECTION_TRIES: usize = 64;

struct Pools {
    genres_of: BTreeMap<u64, BTreeSet<u64>>,
    small_shop_users: Vec<u64>,
    other_genre: BTreeMap<u64, Vec<u64>>,
}

impl Pools {
    fn new(positives: &[InteractionRecord], taxonomy: &ShopTaxonomy) -> Self {
        let mut genres_of: BTreeMap<u64, BTreeSet<u64>> = BTreeMap::new();
        let mut small = BTreeSet::new();
        for r in positives {
            let g = genres_of.entry(r.user_id).or_default();
            if let Some(genre) = r.genre_l3 {
                g.insert(genre);
            }
            if taxonomy.sampling_class(r.shop_id) == SizeClass::Small {
                small.insert(r.user_id);
            }
        }
        Self {
            genres_of,
            small_shop_users: small.into_iter().collect(),
            other_genre: BTreeMap::new(),
        }
    }

    fn other_genre(&mut self, genre: u64) -> &[u64] {
        let genres_of = &self.genres_of;
        self.other_genre.entry(genre).or_insert_with(|| {
            genres_of
                .iter()
                .filter(|(_, gs)| gs.iter().any(|&g| g != genre))
                .map(|(&u, _)| u)
                .collect()
        })
    }
}

fn draw_from(pool: &[u64], item: u64, positive: &HashSet<(u64, u64)>, r: &mut rng::Rng) -> Option<u64> {
    if pool.is_empty() {
        return None;
    }
    for _ in 0..REJECTION_TRIES {
        let u = pool[r.random_range(0..pool.len())];
        if !positive.contains(&(item, u)) {
            return Some(u);
        }
    }
    let eligible: Vec<u64> = pool.iter().copied().filter(|&u| !positive.contains(&(item, u))).collect();
    if eligible.is_empty() {
        None
    } else {
        Some(eligible[r.random_range(0..eligible.len())])
    }
}

/// Negative-user pools built from a purchase history.
pub struct NegativeSampler<'a> {
    pools: Pools,
    positive: HashSet<(u64, u64)>,
    taxonomy: &'a ShopTaxonomy,
}

impl<'a> NegativeSampler<'a> {
    /// `purchases` defines both the user pools and the (item, user) pairs a
    /// negative may never take.
    pub fn new(purchases: &[InteractionRecord], taxonomy: &'a ShopTaxonomy) -> Self {
        Self {
            pools: Pools::new(purchases, taxonomy),
            positive: purchases.iter().map(|r| (r.item_id, r.user_id)).collect(),
            taxonomy,
        }
    }

    /// Draws `round(ratio · |positives|)` negative (item, user) pairs.
    ///
    /// Negative `k` belongs to positive `k mod |positives|`. Every negative
    /// keeps the item, shop and genre of its positive, gets label 0 and a
    /// user that never purchased that item. `N2` on a large-shop item
    /// consumes the random stream exactly as `N0` does.
    pub fn sample(
        &mut self,
        positives: &[InteractionRecord],
        strategy: NegativeStrategy,
        ratio: f64,
        seed: u64,
    ) -> Result<Vec<SampledNegative>> {
        if !(ratio > 0.0 && ratio.is_finite()) {
            return Err(Error::Config(format!("negative ratio must be positive, got {ratio}")));
        }
        if let Some(r) = positives.iter().find(|r| r.genre_l3.is_none()) {
            return Err(Error::Config(format!(
                "negative sampling needs genre_l3, missing for item {}",
                r.item_id
            )));
        }
        if positives.is_empty() {
            return Ok(Vec::new());
        }
        for r in positives {
            self.positive.insert((r.item_id, r.user_id));
        }
        let n = (ratio * positives.len() as f64).round() as usize;
        let mut r = rng::seeded(seed);
        let mut out = Vec::with_capacity(n);
        for k in 0..n {
            let pos = &positives[k % positives.len()];
            let genre = pos.genre_l3.unwrap_or_default();
            let coin = match strategy {
                NegativeStrategy::N0 => false,
                NegativeStrategy::N2 if self.taxonomy.sampling_class(pos.shop_id) != SizeClass::Small => false,
                NegativeStrategy::N1 | NegativeStrategy::N2 => true,
            };
            let branch = if coin && r.random_bool(0.5) {
                NegativeBranch::SmallShop
            } else {
                NegativeBranch::OtherGenre
            };
            let pool = match branch {
                NegativeBranch::SmallShop => &self.pools.small_shop_users[..],
                NegativeBranch::OtherGenre => self.pools.other_genre(genre),
            };
            let user =
                draw_from(pool, pos.item_id, &self.positive, &mut r).ok_or(Error::NoNegativePool { item: pos.item_id })?;
            out.push(SampledNegative {
                record: InteractionRecord {
                    user_id: user,
                    label: 0.0,
                    timestamp: None,
                    ..pos.clone()
                },
                branch,
            });
        }
        Ok(out)
    }
}

/// Negatives for `positives` with pools drawn from the positives themselves.
pub fn negative_sample(
    positives: &[InteractionRecord],
    strategy: NegativeStrategy,
    taxonomy: &ShopTaxonomy,
    ratio: f64,
    seed: u64,
) -> Result<Vec<InteractionRecord>> {
    Ok(NegativeSampler::new(positives, taxonomy)
        .sample(positives, strategy, ratio, seed)?
        .into_iter()
        .map(|s| s.record)
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datapipe::taxonomy::classify_shops;
    use proptest::prelude::*;

    fn pos(user: u64, item: u64, shop: u64, genre: u64) -> InteractionRecord {
        InteractionRecord {
            genre_l3: Some(genre),
            ..InteractionRecord::new(user, item, shop, 1.0)
        }
    }

    /// Sales 40, 2, 3, 4, 5 for shops 0..=4: median 4, so shops 1 and 2 are
    /// small.
    fn market() -> Vec<InteractionRecord> {
        let mut recs = Vec::new();
        for u in 0..40 {
            recs.push(pos(u, 1000 + u, 0, 0));
        }
        for s in 1..=4u64 {
            for k in 0..=s {
                let u = 40 + s * 10 + k;
                recs.push(pos(u, 2000 + s * 10 + k, s, s));
            }
        }
        recs
    }

    #[test]
    fn forced_choice_in_n0() {
        let history = vec![pos(1, 10, 0, 0), pos(2, 20, 1, 5)];
        let tax = classify_shops(&history, &[]);
        let negs = NegativeSampler::new(&history, &tax)
            .sample(&history[..1], NegativeStrategy::N0, 1.0, 0)
            .unwrap();
        assert_eq!(negs.len(), 1);
        assert_eq!(negs[0].record, InteractionRecord { genre_l3: Some(0), ..InteractionRecord::new(2, 10, 0, 0.0) });
    }

    #[test]
    fn empty_pool_names_the_item() {
        let history = vec![pos(1, 10, 0, 0), pos(2, 20, 1, 0)];
        let tax = classify_shops(&history, &[]);
        let err = negative_sample(&history, NegativeStrategy::N0, &tax, 1.0, 0).unwrap_err();
        assert!(matches!(err, Error::NoNegativePool { item: 10 }));
        assert!(err.to_string().contains("10"));
    }

    #[test]
    fn ratio_controls_count() {
        let recs = market();
        let tax = classify_shops(&recs, &[]);
        for (ratio, want) in [(1.0, recs.len()), (2.0, 2 * recs.len()), (0.5, recs.len() / 2)] {
            assert_eq!(negative_sample(&recs, NegativeStrategy::N1, &tax, ratio, 3).unwrap().len(), want);
        }
        assert!(negative_sample(&recs, NegativeStrategy::N1, &tax, 0.0, 3).is_err());
    }

    #[test]
    fn n2_on_large_shop_matches_n0() {
        let recs = market();
        let tax = classify_shops(&recs, &[]);
        assert_eq!(tax.sampling_class(0), SizeClass::Large);
        let large: Vec<_> = recs.iter().filter(|r| r.shop_id == 0).cloned().collect();
        let ratio = 1000.0 / large.len() as f64;
        let mut sampler = NegativeSampler::new(&recs, &tax);
        let n0 = sampler.sample(&large, NegativeStrategy::N0, ratio, 42).unwrap();
        let n2 = sampler.sample(&large, NegativeStrategy::N2, ratio, 42).unwrap();
        assert_eq!(n0.len(), 1000);
        assert_eq!(n0, n2);
    }

    #[test]
    fn n1_coin_is_fair() {
        let recs = market();
        let tax = classify_shops(&recs, &[]);
        let s = NegativeSampler::new(&recs, &tax)
            .sample(&recs, NegativeStrategy::N1, 10_000.0 / recs.len() as f64, 11)
            .unwrap();
        assert_eq!(s.len(), 10_000);
        let small = s.iter().filter(|x| x.branch == NegativeBranch::SmallShop).count() as f64 / s.len() as f64;
        assert!((0.45..=0.55).contains(&small), "{small}");
    }

    #[test]
    fn n2_small_shop_items_use_both_branches() {
        let recs = market();
        let tax = classify_shops(&recs, &[]);
        let s = NegativeSampler::new(&recs, &tax).sample(&recs, NegativeStrategy::N2, 20.0, 1).unwrap();
        for x in &s {
            if x.record.shop_id == 0 {
                assert_eq!(x.branch, NegativeBranch::OtherGenre);
            }
        }
        assert!(s.iter().any(|x| x.branch == NegativeBranch::SmallShop));
    }

    #[test]
    fn missing_genre_is_rejected() {
        let recs = vec![InteractionRecord::new(1, 2, 3, 1.0)];
        let tax = classify_shops(&recs, &[]);
        assert!(matches!(negative_sample(&recs, NegativeStrategy::N0, &tax, 1.0, 0), Err(Error::Config(_))));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]
        #[test]
        fn negatives_never_collide_with_positives(
            pairs in prop::collection::btree_set((0u64..12, 0u64..15), 2..60),
            strategy in prop::sample::select(vec![NegativeStrategy::N0, NegativeStrategy::N1, NegativeStrategy::N2]),
            seed in any::<u64>(),
        ) {
            let recs: Vec<_> = pairs.iter().map(|&(u, i)| pos(u, i, i % 5, i % 3)).collect();
            let tax = classify_shops(&recs, &[]);
            let positive: HashSet<(u64, u64)> = recs.iter().map(|r| (r.item_id, r.user_id)).collect();
            match negative_sample(&recs, strategy, &tax, 1.0, seed) {
                Ok(negs) => {
                    prop_assert_eq!(negs.len(), recs.len());
                    for n in &negs {
                        prop_assert!(!positive.contains(&(n.item_id, n.user_id)));
                        prop_assert_eq!(n.label, 0.0);
                    }
                    prop_assert_eq!(&negs, &negative_sample(&recs, strategy, &tax, 1.0, seed).unwrap());
                }
                Err(Error::NoNegativePool { .. }) => {}
                Err(e) => prop_assert!(false, "{e}"),
            }
        }
    }
}
