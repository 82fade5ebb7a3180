//! Scenario construction: planted synthetic instances, MovieLens 100K
//! genre blocks and shuffled image tiles.

mod image;
mod movielens;

pub use image::{encode_pgm, parse_pgm, read_pgm, shuffle_image_blocks, write_pgm, BlockRegion, GrayImage, ImageScenario};
pub use movielens::{
    build_movielens, load_movielens, parse_items, parse_ratings, Genre, MovieLensOptions, MovieLensScenario, GENRE_PRIORITY,
};

use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::index::sample;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::lamat::{DenseMatrix, Mask, MaskedMatrix};
use crate::perm::{Permutation, Sparsity};
use crate::rng::{gaussian_matrix, seeded};
use crate::solvers::BlockPartition;

/// Ground truth attached to a scenario, in unshuffled coordinates.
#[derive(Clone, Debug)]
pub struct Truth {
    pub matrix: DenseMatrix,
    /// Shuffle of each permuted block: observed row `perms[l](i)` is true row `i`.
    pub perms: Vec<Permutation>,
    pub train_mask: Mask,
    pub test_mask: Mask,
}

#[derive(Clone, Debug)]
pub struct Scenario {
    pub observed: MaskedMatrix,
    pub partition: BlockPartition,
    pub truth: Option<Truth>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShuffleKind {
    Uniform,
    Identity,
    /// Exactly this many rows moved per block.
    Moved(usize),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SyntheticParams {
    pub n: usize,
    pub r: usize,
    pub eta: f64,
    pub partition: BlockPartition,
    pub obs_frac: f64,
    #[serde(default = "uniform")]
    pub shuffle: ShuffleKind,
}

fn uniform() -> ShuffleKind {
    ShuffleKind::Uniform
}

/// Permutes the rows of each block of `x` so that row `i` of block `l` lands on row `perms[l](i)`.
pub fn shuffle_blocks(x: &DenseMatrix, part: &BlockPartition, perms: &[Permutation]) -> Result<DenseMatrix> {
    let mut out = x.clone();
    for (l, p) in perms.iter().enumerate() {
        let off = part.offset(l);
        let moved = p.apply_rows(&x.columns(off, part.widths[l]).into_owned())?;
        out.columns_mut(off, part.widths[l]).copy_from(&moved);
    }
    Ok(out)
}

/// Mask in true coordinates from a mask in observed coordinates.
pub fn unshuffle_mask(mask: &Mask, part: &BlockPartition, perms: &[Permutation]) -> Mask {
    let (n, m) = mask.shape();
    Mask::from_fn(n, m, |i, j| {
        for (l, p) in perms.iter().enumerate() {
            let off = part.offset(l);
            if j >= off && j < off + part.widths[l] {
                return mask.get(p.get(i), j);
            }
        }
        mask.get(i, j)
    })
}

/// `M = RE + ηW` with standard normal factors and noise, split by the
/// partition, each block row-shuffled, then exactly `round(obs_frac·n·m)`
/// entries kept uniformly at random.
pub fn gen_synthetic(p: &SyntheticParams, seed: u64) -> Result<Scenario> {
    let n = p.n;
    let m = p.partition.total();
    p.partition.check_width(m)?;
    if p.r > n.min(m) {
        return Err(invalid(format!("rank {} exceeds min({n}, {m})", p.r)));
    }
    if !(p.obs_frac > 0.0 && p.obs_frac <= 1.0) {
        return Err(invalid(format!("obs_frac must lie in (0, 1], got {}", p.obs_frac)));
    }
    if p.eta < 0.0 {
        return Err(invalid("eta must be nonnegative"));
    }
    let mut rng = seeded(seed);
    let r_fac = gaussian_matrix(&mut rng, n, p.r);
    let e_fac = gaussian_matrix(&mut rng, p.r, m);
    let w = gaussian_matrix(&mut rng, n, m);
    let truth = &r_fac * &e_fac + w * p.eta;
    let perms: Vec<Permutation> = (0..p.partition.d())
        .map(|_| match p.shuffle {
            ShuffleKind::Uniform => Ok(Permutation::random(n, &mut rng)),
            ShuffleKind::Identity => Ok(Permutation::identity(n)),
            ShuffleKind::Moved(k) => Permutation::sample(n, Sparsity::Moved(k), &mut rng),
        })
        .collect::<Result<_>>()?;
    let data = shuffle_blocks(&truth, &p.partition, &perms)?;
    let mask = uniform_mask(n, m, p.obs_frac, &mut rng);
    let train_mask = unshuffle_mask(&mask, &p.partition, &perms);
    Ok(Scenario {
        observed: MaskedMatrix::new(data, mask)?,
        partition: p.partition.clone(),
        truth: Some(Truth {
            matrix: truth,
            test_mask: train_mask.complement(),
            train_mask,
            perms,
        }),
    })
}

/// Exactly `round(frac·n·m)` positions, drawn without replacement.
pub fn uniform_mask<R: Rng + ?Sized>(n: usize, m: usize, frac: f64, rng: &mut R) -> Mask {
    let k = ((frac * (n * m) as f64).round() as usize).min(n * m);
    let mut idx: Vec<usize> = sample(rng, n * m, k).into_vec();
    idx.sort_unstable();
    let mut mask = Mask::empty(n, m);
    for t in idx {
        mask.set(t / m, t % m, true);
    }
    mask
}

#[derive(Serialize, Deserialize)]
struct Manifest {
    rows: usize,
    cols: usize,
    observed: usize,
    partition: BlockPartition,
    perms: Option<Vec<Permutation>>,
}

fn write_matrix_csv(path: &Path, x: &DenseMatrix, mask: Option<&Mask>) -> Result<()> {
    let mut out = String::new();
    for i in 0..x.nrows() {
        let row: Vec<String> = (0..x.ncols())
            .map(|j| match mask {
                Some(mk) if !mk.get(i, j) => String::new(),
                _ => format!("{:e}", x[(i, j)]),
            })
            .collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    fs::write(path, out)?;
    Ok(())
}

impl Scenario {
    /// Writes `manifest.json`, `observed.csv` (blank where unobserved) and,
    /// with ground truth, `truth.csv`. Returns the written paths.
    pub fn dump(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        fs::create_dir_all(dir)?;
        let (rows, cols) = self.observed.shape();
        let manifest = Manifest {
            rows,
            cols,
            observed: self.observed.mask.count(),
            partition: self.partition.clone(),
            perms: self.truth.as_ref().map(|t| t.perms.clone()),
        };
        let mut paths = vec![dir.join("manifest.json"), dir.join("observed.csv")];
        fs::write(&paths[0], serde_json::to_string_pretty(&manifest)?)?;
        write_matrix_csv(&paths[1], &self.observed.data, Some(&self.observed.mask))?;
        if let Some(t) = &self.truth {
            let p = dir.join("truth.csv");
            write_matrix_csv(&p, &t.matrix, None)?;
            paths.push(p);
        }
        Ok(paths)
    }
}
