//! Dense linear algebra used throughout the crate: thin SVD, nuclear and
//! spectral norms, the nuclear-norm proximal operator and masked projections.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

pub type DenseMatrix = DMatrix<f64>;

/// Relative cutoff below which a singular value is treated as zero.
pub const RANK_REL_TOL: f64 = 1e-8;

/// Thin singular value decomposition `X = U diag(sigma) Vᵀ`, singular values
/// sorted non-increasing.
#[derive(Clone, Debug)]
pub struct SvdFactors {
    pub u: DenseMatrix,
    pub sigma: DVector<f64>,
    pub v: DenseMatrix,
}

impl SvdFactors {
    pub fn reconstruct(&self) -> DenseMatrix {
        let mut us = self.u.clone();
        for (k, s) in self.sigma.iter().enumerate() {
            us.column_mut(k).scale_mut(*s);
        }
        us * self.v.transpose()
    }

    /// Number of singular values above `RANK_REL_TOL * sigma_1`.
    pub fn numeric_rank(&self) -> usize {
        match self.sigma.get(0) {
            Some(&s1) if s1 > 0.0 => self.sigma.iter().filter(|&&s| s > RANK_REL_TOL * s1).count(),
            _ => 0,
        }
    }
}

pub fn ensure_finite(x: &DenseMatrix) -> Result<()> {
    if x.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::Numeric("matrix has non-finite entries".into()))
    }
}

fn to_faer(x: &DenseMatrix) -> faer::Mat<f64> {
    faer::Mat::from_fn(x.nrows(), x.ncols(), |i, j| x[(i, j)])
}

pub fn svd(x: &DenseMatrix) -> Result<SvdFactors> {
    ensure_finite(x)?;
    let (n, m) = x.shape();
    let k = n.min(m);
    if k == 0 {
        return Ok(SvdFactors {
            u: DenseMatrix::zeros(n, 0),
            sigma: DVector::zeros(0),
            v: DenseMatrix::zeros(m, 0),
        });
    }
    let f = to_faer(x)
        .thin_svd()
        .map_err(|e| Error::Numeric(format!("svd of {n}x{m} matrix failed: {e:?}")))?;
    let (u, s, v) = (f.U(), f.S().column_vector(), f.V());
    Ok(SvdFactors {
        u: DenseMatrix::from_fn(n, k, |i, j| u[(i, j)]),
        sigma: DVector::from_fn(k, |i, _| s[i]),
        v: DenseMatrix::from_fn(m, k, |i, j| v[(i, j)]),
    })
}

/// Singular values, sorted non-increasing.
pub fn singular_values(x: &DenseMatrix) -> Result<DVector<f64>> {
    ensure_finite(x)?;
    if x.is_empty() {
        return Ok(DVector::zeros(0));
    }
    let mut s = to_faer(x)
        .singular_values()
        .map_err(|e| Error::Numeric(format!("singular values failed: {e:?}")))?;
    s.sort_by(|a, b| b.total_cmp(a));
    Ok(DVector::from_vec(s))
}

pub fn nuclear_norm(x: &DenseMatrix) -> Result<f64> {
    Ok(singular_values(x)?.sum())
}

pub fn spectral_norm(x: &DenseMatrix) -> Result<f64> {
    Ok(singular_values(x)?.get(0).copied().unwrap_or(0.0))
}

pub fn numeric_rank(x: &DenseMatrix) -> Result<usize> {
    let s = singular_values(x)?;
    Ok(match s.get(0) {
        Some(&s1) if s1 > 0.0 => s.iter().filter(|&&v| v > RANK_REL_TOL * s1).count(),
        _ => 0,
    })
}

/// Result of a singular value soft-threshold.
#[derive(Clone, Debug)]
pub struct Shrunk {
    pub matrix: DenseMatrix,
    /// Nuclear norm of `matrix`, i.e. the sum of the thresholded singular values.
    pub nuclear: f64,
    pub rank: usize,
}

/// `U S_lam(D) Vᵀ`: the minimizer of `½‖X − M‖²_F + lam‖M‖_*`.
pub fn prox_nuclear(x: &DenseMatrix, lam: f64) -> Result<DenseMatrix> {
    Ok(prox_nuclear_full(x, lam)?.matrix)
}

pub fn prox_nuclear_full(x: &DenseMatrix, lam: f64) -> Result<Shrunk> {
    if !(lam >= 0.0) {
        return Err(invalid(format!("prox threshold must be nonnegative, got {lam}")));
    }
    let f = svd(x)?;
    let (n, m) = x.shape();
    let mut out = DenseMatrix::zeros(n, m);
    let mut nuclear = 0.0;
    let mut rank = 0;
    for (k, &s) in f.sigma.iter().enumerate() {
        let t = (s - lam).max(0.0);
        if t <= 0.0 {
            // sorted, nothing further survives
            break;
        }
        nuclear += t;
        rank += 1;
        let u = f.u.column(k);
        let v = f.v.column(k);
        out.ger(t, &u, &v, 1.0);
    }
    Ok(Shrunk {
        matrix: out,
        nuclear,
        rank,
    })
}

/// Observed index set Ω stored as a dense boolean grid.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Mask {
    rows: usize,
    cols: usize,
    bits: Vec<bool>,
    count: usize,
}

impl Mask {
    pub fn empty(rows: usize, cols: usize) -> Self {
        Mask {
            rows,
            cols,
            bits: vec![false; rows * cols],
            count: 0,
        }
    }

    pub fn full(rows: usize, cols: usize) -> Self {
        Mask {
            rows,
            cols,
            bits: vec![true; rows * cols],
            count: rows * cols,
        }
    }

    pub fn from_indices(rows: usize, cols: usize, idx: &[(usize, usize)]) -> Result<Self> {
        let mut m = Mask::empty(rows, cols);
        for &(i, j) in idx {
            if i >= rows || j >= cols {
                return Err(invalid(format!("mask index ({i}, {j}) out of bounds for {rows}x{cols}")));
            }
            m.set(i, j, true);
        }
        Ok(m)
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> bool) -> Self {
        let mut m = Mask::empty(rows, cols);
        for i in 0..rows {
            for j in 0..cols {
                if f(i, j) {
                    m.set(i, j, true);
                }
            }
        }
        m
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn count(&self) -> usize {
        self.count
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> bool {
        self.bits[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, on: bool) {
        let b = &mut self.bits[i * self.cols + j];
        if *b != on {
            if on {
                self.count += 1;
            } else {
                self.count -= 1;
            }
            *b = on;
        }
    }

    pub fn indices(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::with_capacity(self.count);
        for i in 0..self.rows {
            for j in 0..self.cols {
                if self.get(i, j) {
                    out.push((i, j));
                }
            }
        }
        out
    }

    /// Observed columns of row `i`.
    pub fn row_support(&self, i: usize) -> impl Iterator<Item = usize> + '_ {
        let row = &self.bits[i * self.cols..(i + 1) * self.cols];
        row.iter().enumerate().filter(|(_, b)| **b).map(|(j, _)| j)
    }

    pub fn columns(&self, start: usize, width: usize) -> Mask {
        Mask::from_fn(self.rows, width, |i, j| self.get(i, start + j))
    }

    pub fn complement(&self) -> Mask {
        Mask::from_fn(self.rows, self.cols, |i, j| !self.get(i, j))
    }

    /// Row-permuted mask: row `i` of the output is row `src[i]` of `self`.
    pub fn gather_rows(&self, src: &[usize]) -> Mask {
        Mask::from_fn(src.len(), self.cols, |i, j| self.get(src[i], j))
    }

    pub fn hstack(parts: &[&Mask]) -> Result<Mask> {
        let rows = parts.first().map(|m| m.rows).unwrap_or(0);
        if let Some(bad) = parts.iter().find(|m| m.rows != rows) {
            return Err(Error::SizeMismatch(rows, bad.rows));
        }
        let cols: usize = parts.iter().map(|m| m.cols).sum();
        let mut out = Mask::empty(rows, cols);
        let mut off = 0;
        for p in parts {
            for i in 0..rows {
                for j in 0..p.cols {
                    if p.get(i, j) {
                        out.set(i, off + j, true);
                    }
                }
            }
            off += p.cols;
        }
        Ok(out)
    }
}

/// Dense values together with the set of observed positions.
#[derive(Clone, Debug)]
pub struct MaskedMatrix {
    pub data: DenseMatrix,
    pub mask: Mask,
}

impl MaskedMatrix {
    pub fn new(data: DenseMatrix, mask: Mask) -> Result<Self> {
        if data.shape() != mask.shape() {
            return Err(Error::ShapeMismatch {
                expected: data.shape(),
                got: mask.shape(),
            });
        }
        Ok(MaskedMatrix { data, mask })
    }

    pub fn fully_observed(data: DenseMatrix) -> Self {
        let (n, m) = data.shape();
        MaskedMatrix {
            data,
            mask: Mask::full(n, m),
        }
    }

    pub fn shape(&self) -> (usize, usize) {
        self.data.shape()
    }

    pub fn columns(&self, start: usize, width: usize) -> MaskedMatrix {
        MaskedMatrix {
            data: self.data.columns(start, width).into_owned(),
            mask: self.mask.columns(start, width),
        }
    }

    /// Row `i` of the output is row `src[i]` of `self`, for both values and mask.
    pub fn gather_rows(&self, src: &[usize]) -> MaskedMatrix {
        let data = DenseMatrix::from_fn(src.len(), self.data.ncols(), |i, j| self.data[(src[i], j)]);
        MaskedMatrix {
            data,
            mask: self.mask.gather_rows(src),
        }
    }

    pub fn hstack(parts: &[&MaskedMatrix]) -> Result<MaskedMatrix> {
        let masks: Vec<&Mask> = parts.iter().map(|p| &p.mask).collect();
        let mask = Mask::hstack(&masks)?;
        let (rows, cols) = mask.shape();
        let mut data = DenseMatrix::zeros(rows, cols);
        let mut off = 0;
        for p in parts {
            let w = p.data.ncols();
            data.columns_mut(off, w).copy_from(&p.data);
            off += w;
        }
        Ok(MaskedMatrix { data, mask })
    }

    /// `½‖P_Ω(X) − P_Ω(M)‖²_F` without the one-half: plain squared residual on Ω.
    pub fn observed_sq_residual(&self, m: &DenseMatrix) -> f64 {
        let mut s = 0.0;
        for (i, j) in self.mask.indices() {
            let d = self.data[(i, j)] - m[(i, j)];
            s += d * d;
        }
        s
    }
}

/// `P_Ω(X)` (or `P_Ω^⊥(X)` with `complement`): entries outside the selected
/// set are zeroed.
pub fn mask_project(x: &MaskedMatrix, complement: bool) -> DenseMatrix {
    let (n, m) = x.shape();
    DenseMatrix::from_fn(n, m, |i, j| {
        if x.mask.get(i, j) != complement {
            x.data[(i, j)]
        } else {
            0.0
        }
    })
}

/// `P_Ω(observed) + P_Ω^⊥(fill)`.
pub fn impute(observed: &MaskedMatrix, fill: &DenseMatrix) -> DenseMatrix {
    let (n, m) = observed.shape();
    DenseMatrix::from_fn(n, m, |i, j| {
        if observed.mask.get(i, j) {
            observed.data[(i, j)]
        } else {
            fill[(i, j)]
        }
    })
}

pub fn hstack(parts: &[&DenseMatrix]) -> Result<DenseMatrix> {
    let rows = parts.first().map(|m| m.nrows()).unwrap_or(0);
    if let Some(bad) = parts.iter().find(|m| m.nrows() != rows) {
        return Err(Error::SizeMismatch(rows, bad.nrows()));
    }
    let cols = parts.iter().map(|m| m.ncols()).sum();
    let mut out = DenseMatrix::zeros(rows, cols);
    let mut off = 0;
    for p in parts {
        out.columns_mut(off, p.ncols()).copy_from(*p);
        off += p.ncols();
    }
    Ok(out)
}
