//! Interaction loading, task construction, shop taxonomy, negative sampling
//! and the synthetic marketplace generator.

pub mod features;
pub mod movielens;
pub mod negative;
pub mod records;
pub mod synthetic;
pub mod taxonomy;
pub mod tasks;

pub use features::{load_features, read_features, write_features, FeatureLayout, FeatureStore, FeatureTable};
pub use movielens::{assemble, genre_id, load_movielens, parse_movies, parse_ratings, parse_users, Movie, MovieLensData, MovieLensOptions, GENRES};
pub use negative::{negative_sample, NegativeBranch, NegativeSampler, NegativeStrategy, SampledNegative};
pub use records::{load_interactions, read_interactions, write_interactions, FormatSpec, InteractionRecord};
pub use synthetic::{generate_synthetic, write_latents, SyntheticDataset, SyntheticLatents, SyntheticSpec};
pub use tasks::{build_tasks, build_tasks_by, ShopTask, SizeClass, TaskUnit, DEFAULT_MIN_INTERACTIONS, DEFAULT_SUPPORT_SIZE};
pub use taxonomy::{classify_shops, ShopClass, ShopTaxonomy};
