use std::collections::HashMap;
use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::{shuffle_blocks, Scenario, Truth};
use crate::error::{invalid, Error, Result};
use crate::lamat::{DenseMatrix, Mask, MaskedMatrix};
use crate::perm::Permutation;
use crate::rng::seeded;
use crate::solvers::BlockPartition;

/// The genres used as column blocks, with their flag index in `u.item`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Genre {
    Action,
    Comedy,
    Drama,
    Romance,
    Thriller,
}

impl Genre {
    /// Position among the 19 genre flags of `u.item`.
    pub fn flag(self) -> usize {
        match self {
            Genre::Action => 1,
            Genre::Comedy => 5,
            Genre::Drama => 8,
            Genre::Romance => 14,
            Genre::Thriller => 16,
        }
    }
}

/// Movies carrying several genres go to the earliest listed one; the first
/// genre is the unpermuted anchor block.
pub const GENRE_PRIORITY: [Genre; 5] = [Genre::Comedy, Genre::Romance, Genre::Drama, Genre::Action, Genre::Thriller];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MovieLensOptions {
    pub genres: Vec<Genre>,
    pub train_frac: f64,
    pub seed: u64,
}

impl Default for MovieLensOptions {
    fn default() -> Self {
        MovieLensOptions {
            genres: GENRE_PRIORITY.to_vec(),
            train_frac: 0.8,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug)]
pub struct MovieLensScenario {
    pub scenario: Scenario,
    pub users: usize,
    /// Movies listed in `u.item`.
    pub movies_total: usize,
    /// Ratings read from `u.data`.
    pub ratings_total: usize,
    /// Ratings falling in one of the selected genre blocks.
    pub ratings_used: usize,
    /// Movie ids (1-based) of each block's columns, anchor first.
    pub block_movies: Vec<Vec<usize>>,
}

fn parse_err(file: &str, line: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        line,
        msg: format!("{file}: {}", msg.into()),
    }
}

/// `(user, item, rating)` triples, ids 1-based.
pub fn parse_ratings(text: &str) -> Result<Vec<(usize, usize, f64)>> {
    let mut out = Vec::new();
    for (k, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split('\t').collect();
        if f.len() != 4 {
            return Err(parse_err("u.data", k + 1, format!("expected 4 tab-separated fields, found {}", f.len())));
        }
        let id = |s: &str, what: &str| -> Result<usize> {
            match s.trim().parse::<usize>() {
                Ok(v) if v >= 1 => Ok(v),
                _ => Err(parse_err("u.data", k + 1, format!("bad {what} {s:?}"))),
            }
        };
        let user = id(f[0], "user id")?;
        let item = id(f[1], "item id")?;
        let rating: f64 = f[2]
            .trim()
            .parse()
            .ok()
            .filter(|r| (1.0..=5.0).contains(r))
            .ok_or_else(|| parse_err("u.data", k + 1, format!("bad rating {:?}", f[2])))?;
        out.push((user, item, rating));
    }
    Ok(out)
}

/// Genre flags of every movie, indexed by movie id − 1.
pub fn parse_items(text: &str) -> Result<Vec<[bool; 19]>> {
    let mut out = Vec::new();
    for (k, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split('|').collect();
        if f.len() < 24 {
            return Err(parse_err("u.item", k + 1, format!("expected 24 pipe-separated fields, found {}", f.len())));
        }
        let id: usize = f[0].trim().parse().map_err(|_| parse_err("u.item", k + 1, format!("bad movie id {:?}", f[0])))?;
        if id != out.len() + 1 {
            return Err(parse_err("u.item", k + 1, format!("movie ids must be consecutive, got {id}")));
        }
        let mut flags = [false; 19];
        for (g, flag) in flags.iter_mut().enumerate() {
            *flag = match f[5 + g].trim() {
                "0" => false,
                "1" => true,
                other => return Err(parse_err("u.item", k + 1, format!("bad genre flag {other:?}"))),
            };
        }
        out.push(flags);
    }
    Ok(out)
}

/// Reads `u.data` and `u.item` from `dir`.
pub fn load_movielens(dir: &Path, opts: &MovieLensOptions) -> Result<MovieLensScenario> {
    let ratings = parse_ratings(&fs::read_to_string(dir.join("u.data"))?)?;
    let items = parse_items(&fs::read_to_string(dir.join("u.item")).or_else(|_| {
        // the distributed u.item is Latin-1
        fs::read(dir.join("u.item")).map(|b| b.iter().map(|&c| c as char).collect())
    })?)?;
    build_movielens(&ratings, &items, opts)
}

/// Assembles the multi-genre scenario from parsed ratings and genre flags.
pub fn build_movielens(ratings: &[(usize, usize, f64)], items: &[[bool; 19]], opts: &MovieLensOptions) -> Result<MovieLensScenario> {
    if opts.genres.len() < 2 {
        return Err(invalid("need an anchor genre and at least one permuted genre"));
    }
    if !(opts.train_frac > 0.0 && opts.train_frac <= 1.0) {
        return Err(invalid(format!("train_frac must lie in (0, 1], got {}", opts.train_frac)));
    }
    let users = ratings.iter().map(|r| r.0).max().unwrap_or(0);
    if let Some(&(_, item, _)) = ratings.iter().find(|r| r.1 > items.len()) {
        return Err(invalid(format!("rating refers to unknown movie {item}")));
    }
    let mut block_movies: Vec<Vec<usize>> = vec![Vec::new(); opts.genres.len()];
    for (k, flags) in items.iter().enumerate() {
        if let Some(b) = opts.genres.iter().position(|g| flags[g.flag()]) {
            block_movies[b].push(k + 1);
        }
    }
    if let Some(b) = block_movies.iter().position(|b| b.is_empty()) {
        return Err(invalid(format!("genre {:?} has no movies", opts.genres[b])));
    }
    let mut column: HashMap<usize, usize> = HashMap::new();
    for (c, &id) in block_movies.iter().flatten().enumerate() {
        column.insert(id, c);
    }
    let cols = column.len();
    let mut truth = DenseMatrix::zeros(users, cols);
    let mut entries = Vec::new();
    for &(u, item, r) in ratings {
        if let Some(&c) = column.get(&item) {
            if truth[(u - 1, c)] != 0.0 {
                return Err(invalid(format!("user {u} rated movie {item} twice")));
            }
            truth[(u - 1, c)] = r;
            entries.push((u - 1, c));
        }
    }
    let mut rng = seeded(opts.seed);
    entries.shuffle(&mut rng);
    let n_train = (opts.train_frac * entries.len() as f64).round() as usize;
    let train_mask = Mask::from_indices(users, cols, &entries[..n_train])?;
    let test_mask = Mask::from_indices(users, cols, &entries[n_train..])?;
    let partition = BlockPartition::new(block_movies[0].len(), block_movies[1..].iter().map(Vec::len).collect())?;
    let perms: Vec<Permutation> = (1..block_movies.len()).map(|_| Permutation::random(users, &mut rng)).collect();
    let data = shuffle_blocks(&truth, &partition, &perms)?;
    let mut mask_data = DenseMatrix::zeros(users, cols);
    for (i, j) in train_mask.indices() {
        mask_data[(i, j)] = 1.0;
    }
    let shuffled = shuffle_blocks(&mask_data, &partition, &perms)?;
    let mask = Mask::from_fn(users, cols, |i, j| shuffled[(i, j)] == 1.0);
    Ok(MovieLensScenario {
        scenario: Scenario {
            observed: MaskedMatrix::new(data, mask)?,
            partition,
            truth: Some(Truth {
                matrix: truth,
                perms,
                train_mask,
                test_mask,
            }),
        },
        users,
        movies_total: items.len(),
        ratings_total: ratings.len(),
        ratings_used: entries.len(),
        block_movies,
    })
}
