//! Seeded synthetic marketplace with skewed shop sizes and cold test items.
//!
//! Every user and item carries a latent vector; every shop carries an offset
//! added to its items' latents. A record `(u, i)` in shop `p` is labelled 1
//! when `<z_u, z_i + s_p> + noise > threshold`. Observed features are the
//! user latent and the item latent (without the shop offset) plus Gaussian
//! feature noise, so the shop-specific part of the preference has to be
//! recovered from the shop's own records.
//!
//! Shop sizes follow a truncated Pareto law. Each existing shop splits its
//! items into training items and cold test items; `n_new_shops` additional
//! shops appear only in the test set.

use std::collections::{BTreeMap, HashSet};
use std::io::Write;

use rand::seq::SliceRandom;
use rand::Rng as _;
use rand_distr::{Distribution, Normal};

use super::features::{FeatureStore, FeatureTable};
use super::records::InteractionRecord;
use crate::error::{Error, Result};
use crate::models::FeatureInput;
use crate::rng;

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSpec {
    pub n_users: usize,
    pub n_items: usize,
    /// Existing shops (with training records).
    pub n_shops: usize,
    /// Test-only shops.
    pub n_new_shops: usize,
    pub latent_dim: usize,
    /// Tail index of the shop-size law; smaller means more skew.
    pub pareto_exponent: f64,
    pub noise_std: f64,
    pub threshold: f64,
    /// Scale of the shop offsets relative to the item latents.
    pub shop_effect: f64,
    pub feature_noise: f64,
    /// Records over all shops, training and test.
    pub n_interactions: usize,
    pub min_shop_interactions: usize,
    /// Share of an existing shop's records placed on its cold test items.
    pub test_fraction: f64,
    /// Lower bound on test records for every shop.
    pub min_test_interactions: usize,
    pub n_genres: usize,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            n_users: 2000,
            n_items: 3000,
            n_shops: 50,
            n_new_shops: 5,
            latent_dim: 8,
            pareto_exponent: 1.0,
            noise_std: 0.5,
            threshold: 0.0,
            shop_effect: 1.0,
            feature_noise: 0.1,
            n_interactions: 50_000,
            min_shop_interactions: 40,
            test_fraction: 0.2,
            min_test_interactions: 15,
            n_genres: 8,
            seed: 0,
        }
    }
}

/// Ground truth behind a synthetic dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticLatents {
    pub users: BTreeMap<u64, Vec<f64>>,
    pub items: BTreeMap<u64, Vec<f64>>,
    pub shop_offsets: BTreeMap<u64, Vec<f64>>,
    pub item_shop: BTreeMap<u64, u64>,
}

impl SyntheticLatents {
    /// Noise-free affinity `<z_u, z_i + s_p>` of a (user, item) pair.
    pub fn affinity(&self, user: u64, item: u64) -> Option<f64> {
        let u = self.users.get(&user)?;
        let v = self.items.get(&item)?;
        let s = self.shop_offsets.get(self.item_shop.get(&item)?)?;
        Some(latents_affinity(u, v, s))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticDataset {
    pub train: Vec<InteractionRecord>,
    pub test: Vec<InteractionRecord>,
    pub latents: SyntheticLatents,
    pub user_features: BTreeMap<u64, FeatureInput>,
    pub item_features: BTreeMap<u64, FeatureInput>,
    pub new_shops: Vec<u64>,
}

impl SyntheticDataset {
    pub fn feature_store(&self) -> Result<FeatureStore> {
        Ok(FeatureStore {
            users: FeatureTable::dense(self.user_features.clone())?,
            items: FeatureTable::dense(self.item_features.clone())?,
        })
    }
}

impl SyntheticSpec {
    fn validate(&self) -> Result<()> {
        let total_shops = self.n_shops + self.n_new_shops;
        let fail = |m: String| Err(Error::Config(format!("infeasible synthetic spec: {m}")));
        if self.n_users == 0 || self.n_shops == 0 || self.latent_dim == 0 || self.n_genres == 0 {
            return fail("users, shops, latent_dim and genres must be positive".into());
        }
        if self.n_items < 2 * total_shops {
            return fail(format!("{} items cannot give {} shops two items each", self.n_items, total_shops));
        }
        if !(self.pareto_exponent > 0.0) || !self.pareto_exponent.is_finite() {
            return fail("pareto_exponent must be positive".into());
        }
        for (name, v) in [
            ("noise_std", self.noise_std),
            ("shop_effect", self.shop_effect),
            ("feature_noise", self.feature_noise),
        ] {
            if !(v >= 0.0) || !v.is_finite() {
                return fail(format!("{name} must be non-negative"));
            }
        }
        if !(0.0..1.0).contains(&self.test_fraction) {
            return fail("test_fraction must lie in [0, 1)".into());
        }
        if self.min_shop_interactions <= self.min_test_interactions {
            return fail("min_shop_interactions must exceed min_test_interactions".into());
        }
        if self.n_interactions < total_shops * self.min_shop_interactions {
            return fail(format!(
                "{} interactions cannot give {} shops {} each",
                self.n_interactions, total_shops, self.min_shop_interactions
            ));
        }
        Ok(())
    }
}

/// Splits `total` into parts proportional to `weights` with a per-part
/// floor, by largest remainder. The parts sum to `total`.
pub fn allocate(weights: &[f64], total: usize, floor: usize) -> Vec<usize> {
    let n = weights.len();
    if n == 0 {
        return Vec::new();
    }
    let spare = total.saturating_sub(floor * n);
    let sum: f64 = weights.iter().sum();
    let exact: Vec<f64> = weights.iter().map(|w| w / sum * spare as f64).collect();
    let mut parts: Vec<usize> = exact.iter().map(|e| e.floor() as usize).collect();
    let mut left = spare - parts.iter().sum::<usize>();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        let ra = exact[a] - exact[a].floor();
        let rb = exact[b] - exact[b].floor();
        rb.total_cmp(&ra).then(a.cmp(&b))
    });
    for &k in order.iter().cycle() {
        if left == 0 {
            break;
        }
        parts[k] += 1;
        left -= 1;
    }
    parts.iter().map(|p| p + floor).collect()
}

fn gaussian_vec(r: &mut rng::Rng, dist: &Normal<f64>, n: usize) -> Vec<f64> {
    (0..n).map(|_| dist.sample(r)).collect()
}

/// Cap on a Pareto draw relative to its scale.
const PARETO_CAP: f64 = 1e4;

pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<SyntheticDataset> {
    spec.validate()?;
    let d = spec.latent_dim;
    let sigma = (d as f64).powf(-0.25);
    let latent = Normal::new(0.0, sigma).map_err(|e| Error::Config(e.to_string()))?;
    let offset = Normal::new(0.0, sigma * spec.shop_effect).map_err(|e| Error::Config(e.to_string()))?;
    let fnoise = Normal::new(0.0, spec.feature_noise).map_err(|e| Error::Config(e.to_string()))?;
    let lnoise = Normal::new(0.0, spec.noise_std).map_err(|e| Error::Config(e.to_string()))?;

    let mut r = rng::stream(spec.seed, 0);
    let users: BTreeMap<u64, Vec<f64>> = (0..spec.n_users as u64).map(|u| (u, gaussian_vec(&mut r, &latent, d))).collect();
    let items: BTreeMap<u64, Vec<f64>> = (0..spec.n_items as u64).map(|i| (i, gaussian_vec(&mut r, &latent, d))).collect();
    let total_shops = spec.n_shops + spec.n_new_shops;
    let shop_offsets: BTreeMap<u64, Vec<f64>> =
        (0..total_shops as u64).map(|p| (p, gaussian_vec(&mut r, &offset, d))).collect();

    let mut r = rng::stream(spec.seed, 1);
    let weights: Vec<f64> = (0..total_shops)
        .map(|_| {
            let x: f64 = 1.0 - r.random::<f64>();
            x.powf(-1.0 / spec.pareto_exponent).min(PARETO_CAP)
        })
        .collect();
    let sizes = allocate(&weights, spec.n_interactions, spec.min_shop_interactions);
    let item_counts = allocate(&weights.iter().map(|w| w.sqrt()).collect::<Vec<_>>(), spec.n_items, 2);

    let mut r = rng::stream(spec.seed, 2);
    let mut item_ids: Vec<u64> = (0..spec.n_items as u64).collect();
    item_ids.shuffle(&mut r);
    let mut item_shop = BTreeMap::new();
    let mut item_genre = BTreeMap::new();
    let mut shop_items: Vec<(Vec<u64>, Vec<u64>)> = Vec::with_capacity(total_shops);
    let mut cursor = 0;
    for (p, &count) in item_counts.iter().enumerate() {
        let own = &item_ids[cursor..cursor + count];
        cursor += count;
        let shop_genre = p % spec.n_genres;
        for &i in own {
            item_shop.insert(i, p as u64);
            let g = if spec.n_genres > 1 && r.random_bool(0.2) {
                (shop_genre + r.random_range(1..spec.n_genres)) % spec.n_genres
            } else {
                shop_genre
            };
            item_genre.insert(i, g as u64);
        }
        if p < spec.n_shops {
            let n_test = ((count as f64 * spec.test_fraction).round() as usize).clamp(1, count - 1);
            shop_items.push((own[n_test..].to_vec(), own[..n_test].to_vec()));
        } else {
            shop_items.push((Vec::new(), own.to_vec()));
        }
    }

    let mut train = Vec::new();
    let mut test = Vec::new();
    let mut seen: HashSet<(u64, u64)> = HashSet::new();
    for (p, &size) in sizes.iter().enumerate() {
        let (train_items, test_items) = &shop_items[p];
        let n_test = if p < spec.n_shops {
            ((size as f64 * spec.test_fraction).round() as usize).clamp(spec.min_test_interactions, size)
        } else {
            size
        };
        let mut r = rng::stream(spec.seed, 1000 + p as u64);
        for (pool, n, out) in [(train_items, size - n_test, &mut train), (test_items, n_test, &mut test)] {
            if n > pool.len() * spec.n_users {
                return Err(Error::Config(format!("infeasible synthetic spec: shop {p} cannot hold {n} distinct pairs")));
            }
            let mut drawn = 0;
            while drawn < n {
                let i = pool[r.random_range(0..pool.len())];
                let u = r.random_range(0..spec.n_users as u64);
                if !seen.insert((u, i)) {
                    continue;
                }
                let y = latents_affinity(&users[&u], &items[&i], &shop_offsets[&(p as u64)]) + lnoise.sample(&mut r);
                out.push(InteractionRecord {
                    timestamp: None,
                    genre_l3: Some(item_genre[&i]),
                    ..InteractionRecord::new(u, i, p as u64, if y > spec.threshold { 1.0 } else { 0.0 })
                });
                drawn += 1;
            }
        }
    }
    let n_train = train.len() as i64;
    for (k, rec) in train.iter_mut().enumerate() {
        rec.timestamp = Some(k as i64);
    }
    for (k, rec) in test.iter_mut().enumerate() {
        rec.timestamp = Some(n_train + k as i64);
    }

    let mut r = rng::stream(spec.seed, 3);
    let user_features = users
        .iter()
        .map(|(&u, z)| (u, FeatureInput::Dense(z.iter().map(|x| x + fnoise.sample(&mut r)).collect())))
        .collect();
    let item_features = items
        .iter()
        .map(|(&i, z)| (i, FeatureInput::Dense(z.iter().map(|x| x + fnoise.sample(&mut r)).collect())))
        .collect();

    Ok(SyntheticDataset {
        train,
        test,
        latents: SyntheticLatents {
            users,
            items,
            shop_offsets,
            item_shop,
        },
        user_features,
        item_features,
        new_shops: (spec.n_shops as u64..total_shops as u64).collect(),
    })
}

fn latents_affinity(u: &[f64], v: &[f64], s: &[f64]) -> f64 {
    u.iter().zip(v).zip(s).map(|((a, b), c)| a * (b + c)).sum()
}

/// Writes ground truth as `kind,id,v0,..` rows with kind `user`, `item` or
/// `shop`, followed by `item_shop,item,shop` rows.
pub fn write_latents<W: Write>(mut w: W, latents: &SyntheticLatents) -> Result<()> {
    let d = latents.users.values().next().map_or(0, |v| v.len());
    write!(w, "kind,id")?;
    for k in 0..d {
        write!(w, ",v{k}")?;
    }
    writeln!(w)?;
    for (kind, table) in [("user", &latents.users), ("item", &latents.items), ("shop", &latents.shop_offsets)] {
        for (id, v) in table {
            write!(w, "{kind},{id}")?;
            for x in v {
                write!(w, ",{x:?}")?;
            }
            writeln!(w)?;
        }
    }
    for (item, shop) in &latents.item_shop {
        writeln!(w, "item_shop,{item},{shop}")?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_spec(seed: u64) -> SyntheticSpec {
        SyntheticSpec {
            n_users: 300,
            n_items: 400,
            n_shops: 12,
            n_new_shops: 2,
            n_interactions: 3000,
            seed,
            ..SyntheticSpec::default()
        }
    }

    #[test]
    fn same_spec_same_dataset() {
        assert_eq!(generate_synthetic(&small_spec(3)).unwrap(), generate_synthetic(&small_spec(3)).unwrap());
        assert_ne!(generate_synthetic(&small_spec(3)).unwrap().train, generate_synthetic(&small_spec(4)).unwrap().train);
    }

    #[test]
    fn noiseless_labels_follow_latent_sign() {
        let spec = SyntheticSpec {
            noise_std: 0.0,
            threshold: 0.0,
            ..small_spec(1)
        };
        let data = generate_synthetic(&spec).unwrap();
        for r in data.train.iter().chain(&data.test) {
            let a = data.latents.affinity(r.user_id, r.item_id).unwrap();
            assert_eq!(r.label, if a > 0.0 { 1.0 } else { 0.0 });
        }
    }

    #[test]
    fn small_exponent_concentrates_sales() {
        let spec = SyntheticSpec {
            pareto_exponent: 0.5,
            n_shops: 40,
            n_new_shops: 0,
            n_items: 2000,
            n_interactions: 40_000,
            seed: 7,
            ..small_spec(7)
        };
        let data = generate_synthetic(&spec).unwrap();
        let mut per_shop: BTreeMap<u64, usize> = BTreeMap::new();
        for r in data.train.iter().chain(&data.test) {
            *per_shop.entry(r.shop_id).or_default() += 1;
        }
        let mut sizes: Vec<usize> = per_shop.values().copied().collect();
        sizes.sort_unstable_by(|a, b| b.cmp(a));
        let top = sizes[..sizes.len().div_ceil(4)].iter().sum::<usize>() as f64;
        let share = top / spec.n_interactions as f64;
        assert!(share > 0.6, "{share}");
    }

    #[test]
    fn totals_and_new_shops() {
        let spec = small_spec(2);
        let data = generate_synthetic(&spec).unwrap();
        assert_eq!(data.train.len() + data.test.len(), spec.n_interactions);
        let train_shops: HashSet<u64> = data.train.iter().map(|r| r.shop_id).collect();
        for s in &data.new_shops {
            assert!(!train_shops.contains(s));
            assert!(data.test.iter().any(|r| r.shop_id == *s));
        }
        // test items are cold
        let train_items: HashSet<u64> = data.train.iter().map(|r| r.item_id).collect();
        assert!(data.test.iter().all(|r| !train_items.contains(&r.item_id)));
        // every shop has enough test records for a task
        let mut test_sizes: BTreeMap<u64, usize> = BTreeMap::new();
        for r in &data.test {
            *test_sizes.entry(r.shop_id).or_default() += 1;
        }
        assert_eq!(test_sizes.len(), spec.n_shops + spec.n_new_shops);
        assert!(test_sizes.values().all(|&n| n >= spec.min_test_interactions));
    }

    #[test]
    fn pairs_are_unique() {
        let data = generate_synthetic(&small_spec(5)).unwrap();
        let mut seen = HashSet::new();
        for r in data.train.iter().chain(&data.test) {
            assert!(seen.insert((r.user_id, r.item_id)));
        }
    }

    #[test]
    fn infeasible_specs_are_rejected() {
        let more_shops_than_items = SyntheticSpec {
            n_items: 10,
            n_shops: 20,
            ..small_spec(0)
        };
        assert!(matches!(generate_synthetic(&more_shops_than_items), Err(Error::Config(_))));
        let too_few_interactions = SyntheticSpec {
            n_interactions: 100,
            ..small_spec(0)
        };
        assert!(generate_synthetic(&too_few_interactions).is_err());
    }

    #[test]
    fn allocation_sums_and_respects_floor() {
        let parts = allocate(&[5.0, 1.0, 1.0, 0.5], 103, 10);
        assert_eq!(parts.iter().sum::<usize>(), 103);
        assert!(parts.iter().all(|&p| p >= 10));
        assert!(parts[0] > parts[1]);
    }

    #[test]
    fn latents_file_layout() {
        let data = generate_synthetic(&small_spec(1)).unwrap();
        let mut buf = Vec::new();
        write_latents(&mut buf, &data.latents).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), "kind,id,v0,v1,v2,v3,v4,v5,v6,v7");
        assert_eq!(text.lines().filter(|l| l.starts_with("user,")).count(), 300);
        assert_eq!(text.lines().filter(|l| l.starts_with("item_shop,")).count(), 400);
    }
}
