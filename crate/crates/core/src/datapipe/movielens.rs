//! MovieLens-1M adapter: genres act as shops.
//!
//! Reads `ratings.dat`, `users.dat` and `movies.dat` (`::`-separated,
//! Latin-1). A movie belongs to the shop of its first listed genre. Movies
//! released before `cutoff_year` form the training set, the rest the test
//! set. Ratings in held-out genres are dropped from training so those genres
//! only appear as new shops at test time.
//!
//! Users are described by gender, age band, occupation and the first digit
//! of the zip code; movies by release period, first genre and second genre.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use super::features::{FeatureStore, FeatureTable};
use super::records::InteractionRecord;
use crate::error::{Error, Result};
use crate::models::FeatureInput;

pub const GENRES: [&str; 18] = [
    "Action",
    "Adventure",
    "Animation",
    "Children's",
    "Comedy",
    "Crime",
    "Documentary",
    "Drama",
    "Fantasy",
    "Film-Noir",
    "Horror",
    "Musical",
    "Mystery",
    "Romance",
    "Sci-Fi",
    "Thriller",
    "War",
    "Western",
];

const AGES: [u32; 7] = [1, 18, 25, 35, 45, 50, 56];
const N_OCCUPATIONS: usize = 21;
const FIRST_YEAR: i32 = 1915;
const PERIOD_YEARS: i32 = 5;
const N_PERIODS: usize = 18;

#[derive(Debug, Clone, PartialEq)]
pub struct MovieLensOptions {
    /// First release year that counts as test.
    pub cutoff_year: i32,
    /// Genre names kept out of training.
    pub holdout_genres: Vec<String>,
}

impl Default for MovieLensOptions {
    fn default() -> Self {
        Self {
            cutoff_year: 1998,
            holdout_genres: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Movie {
    pub id: u64,
    pub year: i32,
    pub genres: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MovieLensData {
    pub train: Vec<InteractionRecord>,
    pub test: Vec<InteractionRecord>,
    pub features: FeatureStore,
}

pub fn genre_id(name: &str) -> Option<usize> {
    GENRES.iter().position(|g| *g == name)
}

fn read_latin1(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path)?;
    Ok(bytes.iter().map(|&b| b as char).collect())
}

fn fields<'a>(line: &'a str, n: usize, path: &Path, lineno: usize) -> Result<Vec<&'a str>> {
    let f: Vec<&str> = line.split("::").collect();
    if f.len() != n {
        return Err(Error::Load {
            path: path.to_path_buf(),
            line: lineno as u64,
            message: format!("expected {n} `::`-separated fields, found {}", f.len()),
        });
    }
    Ok(f)
}

fn parse_num<T: std::str::FromStr>(s: &str, what: &str, path: &Path, lineno: usize) -> Result<T> {
    s.trim().parse().map_err(|_| Error::Load {
        path: path.to_path_buf(),
        line: lineno as u64,
        message: format!("unparsable {what} `{s}`"),
    })
}

fn lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines().enumerate().map(|(i, l)| (i + 1, l.trim_end())).filter(|(_, l)| !l.is_empty())
}

pub fn parse_movies(text: &str, path: &Path) -> Result<BTreeMap<u64, Movie>> {
    let mut out = BTreeMap::new();
    for (n, line) in lines(text) {
        let f = fields(line, 3, path, n)?;
        let id = parse_num(f[0], "movie id", path, n)?;
        let title = f[1].trim();
        let year = title
            .rfind('(')
            .and_then(|k| title[k + 1..].strip_suffix(')'))
            .and_then(|y| y.parse().ok())
            .ok_or_else(|| Error::Load {
                path: path.to_path_buf(),
                line: n as u64,
                message: format!("no release year in `{title}`"),
            })?;
        let genres = f[2]
            .split('|')
            .map(|g| {
                genre_id(g).ok_or_else(|| Error::Load {
                    path: path.to_path_buf(),
                    line: n as u64,
                    message: format!("unknown genre `{g}`"),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        out.insert(id, Movie { id, year, genres });
    }
    Ok(out)
}

/// Categorical user rows: gender, age band, occupation, zip first digit
/// (10 for a non-digit).
pub fn parse_users(text: &str, path: &Path) -> Result<BTreeMap<u64, FeatureInput>> {
    let mut out = BTreeMap::new();
    for (n, line) in lines(text) {
        let f = fields(line, 5, path, n)?;
        let id = parse_num(f[0], "user id", path, n)?;
        let gender = match f[1] {
            "F" => 0,
            "M" => 1,
            g => {
                return Err(Error::Load {
                    path: path.to_path_buf(),
                    line: n as u64,
                    message: format!("unknown gender `{g}`"),
                })
            }
        };
        let age: u32 = parse_num(f[2], "age", path, n)?;
        let age = AGES.iter().position(|&a| a == age).ok_or_else(|| Error::Load {
            path: path.to_path_buf(),
            line: n as u64,
            message: format!("unknown age band `{age}`"),
        })?;
        let occupation: usize = parse_num(f[3], "occupation", path, n)?;
        if occupation >= N_OCCUPATIONS {
            return Err(Error::Load {
                path: path.to_path_buf(),
                line: n as u64,
                message: format!("unknown occupation `{occupation}`"),
            });
        }
        let zip = f[4].chars().next().and_then(|c| c.to_digit(10)).map_or(10, |d| d as usize);
        out.insert(id, FeatureInput::Categorical(vec![gender, age, occupation, zip]));
    }
    Ok(out)
}

/// `(user, movie, rating, timestamp)` rows.
pub fn parse_ratings(text: &str, path: &Path) -> Result<Vec<(u64, u64, f64, i64)>> {
    lines(text)
        .map(|(n, line)| {
            let f = fields(line, 4, path, n)?;
            Ok((
                parse_num(f[0], "user id", path, n)?,
                parse_num(f[1], "movie id", path, n)?,
                parse_num(f[2], "rating", path, n)?,
                parse_num(f[3], "timestamp", path, n)?,
            ))
        })
        .collect()
}

fn movie_features(m: &Movie) -> FeatureInput {
    let period = ((m.year.clamp(FIRST_YEAR, FIRST_YEAR + PERIOD_YEARS * N_PERIODS as i32 - 1) - FIRST_YEAR) / PERIOD_YEARS) as usize;
    let second = m.genres.get(1).copied().unwrap_or(GENRES.len());
    FeatureInput::Categorical(vec![period, m.genres[0], second])
}

pub fn assemble(
    movies: &BTreeMap<u64, Movie>,
    users: BTreeMap<u64, FeatureInput>,
    ratings: &[(u64, u64, f64, i64)],
    options: &MovieLensOptions,
) -> Result<MovieLensData> {
    let holdout = options
        .holdout_genres
        .iter()
        .map(|g| genre_id(g).ok_or_else(|| Error::Unknown { kind: "genre", id: g.clone() }))
        .collect::<Result<Vec<_>>>()?;
    let mut train = Vec::new();
    let mut test = Vec::new();
    for &(u, i, rating, ts) in ratings {
        let m = movies.get(&i).ok_or_else(|| Error::Unknown { kind: "movie", id: i.to_string() })?;
        if !users.contains_key(&u) {
            return Err(Error::Unknown { kind: "user", id: u.to_string() });
        }
        let shop = m.genres[0];
        let rec = InteractionRecord {
            timestamp: Some(ts),
            genre_l3: Some(shop as u64),
            ..InteractionRecord::new(u, i, shop as u64, rating)
        };
        if m.year >= options.cutoff_year {
            test.push(rec);
        } else if !holdout.contains(&shop) {
            train.push(rec);
        }
    }
    let user_table = FeatureTable::categorical(
        vec![
            ("gender".into(), 2),
            ("age".into(), AGES.len()),
            ("occupation".into(), N_OCCUPATIONS),
            ("zip".into(), 11),
        ],
        users,
    )?;
    let item_table = FeatureTable::categorical(
        vec![
            ("period".into(), N_PERIODS),
            ("genre".into(), GENRES.len()),
            ("genre2".into(), GENRES.len() + 1),
        ],
        movies.values().map(|m| (m.id, movie_features(m))).collect(),
    )?;
    Ok(MovieLensData {
        train,
        test,
        features: FeatureStore {
            users: user_table,
            items: item_table,
        },
    })
}

/// Loads the three `.dat` files from `dir`.
pub fn load_movielens(dir: &Path, options: &MovieLensOptions) -> Result<MovieLensData> {
    let p = |f: &str| -> PathBuf { dir.join(f) };
    let movies = parse_movies(&read_latin1(&p("movies.dat"))?, &p("movies.dat"))?;
    let users = parse_users(&read_latin1(&p("users.dat"))?, &p("users.dat"))?;
    let ratings = parse_ratings(&read_latin1(&p("ratings.dat"))?, &p("ratings.dat"))?;
    assemble(&movies, users, &ratings, options)
}
