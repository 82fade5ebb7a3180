//! Permutations of `{1..n}`, their cycle statistics, seeded sampling and the
//! row action on matrices.
//!
//! Storage is 0-based; the JSON form is a 1-based integer array. A
//! permutation `π` acts on the rows of a matrix like the permutation matrix
//! `P` with `P(π(j), j) = 1`: row `j` of `X` lands at row `π(j)` of `PX`.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{invalid, Error, Result};
use crate::lamat::DenseMatrix;

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Permutation {
    map: Vec<usize>,
}

/// How many points a sampled permutation should move.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Sparsity {
    /// Uniform over all of `S_n`.
    Dense,
    /// Exactly `k` moved points.
    Moved(usize),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct CycleStats {
    /// Non-trivial cycles (length > 1), 0-based, each starting at its smallest element.
    pub cycles: Vec<Vec<usize>>,
    /// Number of moved points.
    pub h: usize,
    /// Number of cycles of length > 1.
    pub c: usize,
}

impl Permutation {
    pub fn identity(n: usize) -> Self {
        Permutation { map: (0..n).collect() }
    }

    pub fn from_vec(map: Vec<usize>) -> Result<Self> {
        let n = map.len();
        let mut seen = vec![false; n];
        for &v in &map {
            if v >= n || seen[v] {
                return Err(invalid(format!("not a permutation of 0..{n}: {map:?}")));
            }
            seen[v] = true;
        }
        Ok(Permutation { map })
    }

    pub fn from_one_based(map: &[usize]) -> Result<Self> {
        if map.contains(&0) {
            return Err(invalid("1-based permutation contains 0"));
        }
        Self::from_vec(map.iter().map(|v| v - 1).collect())
    }

    pub fn to_one_based(&self) -> Vec<usize> {
        self.map.iter().map(|v| v + 1).collect()
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.map
    }

    #[inline]
    pub fn get(&self, i: usize) -> usize {
        self.map[i]
    }

    pub fn is_identity(&self) -> bool {
        self.map.iter().enumerate().all(|(i, &v)| i == v)
    }

    pub fn inverse(&self) -> Self {
        let mut inv = vec![0; self.map.len()];
        for (i, &v) in self.map.iter().enumerate() {
            inv[v] = i;
        }
        Permutation { map: inv }
    }

    /// `(self ∘ other)(i) = self(other(i))`.
    pub fn compose(&self, other: &Permutation) -> Result<Self> {
        if self.len() != other.len() {
            return Err(Error::SizeMismatch(self.len(), other.len()));
        }
        Ok(Permutation {
            map: other.map.iter().map(|&j| self.map[j]).collect(),
        })
    }

    pub fn random<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Self {
        let mut map: Vec<usize> = (0..n).collect();
        map.shuffle(rng);
        Permutation { map }
    }

    /// Samples a permutation of `n` points. In `Moved(k)` mode a uniformly
    /// chosen `k`-subset is deranged by cutting a random ordering of it into
    /// cycles of length at least two, so exactly `k` points move.
    pub fn sample<R: Rng + ?Sized>(n: usize, sparsity: Sparsity, rng: &mut R) -> Result<Self> {
        let k = match sparsity {
            Sparsity::Dense => return Ok(Self::random(n, rng)),
            Sparsity::Moved(0) => return Ok(Self::identity(n)),
            Sparsity::Moved(k) => k,
        };
        if k == 1 {
            return Err(invalid("a permutation cannot move exactly one point"));
        }
        if k > n {
            return Err(invalid(format!("cannot move {k} points out of {n}")));
        }
        let mut pts: Vec<usize> = (0..n).collect();
        pts.shuffle(rng);
        pts.truncate(k);

        let mut map: Vec<usize> = (0..n).collect();
        let mut start = 0;
        while start < k {
            let remaining = k - start;
            // a cycle must leave either nothing or at least two points behind
            let len = if remaining <= 3 {
                remaining
            } else {
                let l = rng.random_range(2..=remaining);
                if l == remaining - 1 {
                    remaining
                } else {
                    l
                }
            };
            let cyc = &pts[start..start + len];
            for t in 0..len {
                map[cyc[t]] = cyc[(t + 1) % len];
            }
            start += len;
        }
        Ok(Permutation { map })
    }

    pub fn cycle_stats(&self) -> CycleStats {
        let n = self.map.len();
        let mut seen = vec![false; n];
        let mut cycles = Vec::new();
        for s in 0..n {
            if seen[s] || self.map[s] == s {
                seen[s] = true;
                continue;
            }
            let mut cyc = vec![s];
            seen[s] = true;
            let mut t = self.map[s];
            while t != s {
                seen[t] = true;
                cyc.push(t);
                t = self.map[t];
            }
            cycles.push(cyc);
        }
        let h = cycles.iter().map(Vec::len).sum();
        CycleStats {
            c: cycles.len(),
            h,
            cycles,
        }
    }

    /// Row `j` of `x` is placed at row `π(j)` of the output.
    pub fn apply_rows(&self, x: &DenseMatrix) -> Result<DenseMatrix> {
        if x.nrows() != self.len() {
            return Err(Error::SizeMismatch(self.len(), x.nrows()));
        }
        let mut out = DenseMatrix::zeros(x.nrows(), x.ncols());
        for (j, &pj) in self.map.iter().enumerate() {
            out.row_mut(pj).copy_from(&x.row(j));
        }
        Ok(out)
    }

    /// Dense permutation matrix `P` with `P(π(j), j) = 1`.
    pub fn to_matrix(&self) -> DenseMatrix {
        let n = self.len();
        let mut p = DenseMatrix::zeros(n, n);
        for (j, &pj) in self.map.iter().enumerate() {
            p[(pj, j)] = 1.0;
        }
        p
    }

    /// Lexicographic successor, `None` after the last permutation.
    pub fn next_lex(&self) -> Option<Self> {
        let mut a = self.map.clone();
        let n = a.len();
        if n < 2 {
            return None;
        }
        let mut i = n - 1;
        while i > 0 && a[i - 1] >= a[i] {
            i -= 1;
        }
        if i == 0 {
            return None;
        }
        let mut j = n - 1;
        while a[j] <= a[i - 1] {
            j -= 1;
        }
        a.swap(i - 1, j);
        a[i..].reverse();
        Some(Permutation { map: a })
    }
}

impl Serialize for Permutation {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.to_one_based().serialize(s)
    }
}

impl<'de> Deserialize<'de> for Permutation {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let v = Vec::<usize>::deserialize(d)?;
        Permutation::from_one_based(&v).map_err(serde::de::Error::custom)
    }
}

pub fn decompose_stats(p: &Permutation) -> CycleStats {
    p.cycle_stats()
}

/// Number of points where the two permutations disagree.
pub fn d_hamming(p1: &Permutation, p2: &Permutation) -> Result<usize> {
    if p1.len() != p2.len() {
        return Err(Error::SizeMismatch(p1.len(), p2.len()));
    }
    Ok(p1.map.iter().zip(&p2.map).filter(|(a, b)| a != b).count())
}

/// Per-block rank data for [`rank_upper_bound`].
#[derive(Clone, Copy, Debug)]
pub struct BlockRank {
    pub rank: usize,
    pub moved: usize,
    pub cycles: usize,
}

/// `min{n, m, r_A + Σ r_Bl, r + Σ (H_l − C_l)}`.
pub fn rank_upper_bound(n: usize, m: usize, r: usize, r_a: usize, blocks: &[BlockRank]) -> usize {
    let sum_rank: usize = r_a + blocks.iter().map(|b| b.rank).sum::<usize>();
    let perturb: usize = r + blocks.iter().map(|b| b.moved.saturating_sub(b.cycles)).sum::<usize>();
    n.min(m).min(sum_rank).min(perturb)
}
