//! Entropic optimal transport between the rows of a candidate block and the
//! rows of a shuffled observed block.
//!
//! The transport problem `min_{P ∈ Π(1,1)} ⟨C, P⟩ + ε Σ P(log P − 1)` is
//! solved through its dual
//!
//! ```text
//! W_ε(α, β) = Σα + Σβ − ε Σ_ij exp((α_i + β_j − C_ij) / ε)
//! ```
//!
//! by exact block-coordinate ascent (Sinkhorn) carried out entirely in the
//! log domain, so small `ε` never overflows.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::lamat::{DenseMatrix, MaskedMatrix};

/// Default iteration cap for a single Sinkhorn solve.
pub const DEFAULT_MAX_ITER: usize = 10_000;
/// Default marginal tolerance.
pub const DEFAULT_TOL: f64 = 0.01;

/// Square nonnegative cost matrix, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct CostMatrix {
    n: usize,
    values: Vec<f64>,
}

impl CostMatrix {
    pub fn from_dense(m: &DenseMatrix) -> Result<Self> {
        let (r, c) = m.shape();
        if r != c {
            return Err(Error::ShapeMismatch { expected: (r, r), got: (r, c) });
        }
        let mut values = Vec::with_capacity(r * r);
        for i in 0..r {
            for j in 0..r {
                values.push(m[(i, j)]);
            }
        }
        Self::from_row_major(r, values)
    }

    pub fn from_row_major(n: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != n * n {
            return Err(Error::SizeMismatch(n * n, values.len()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numeric("cost matrix has non-finite entries".into()));
        }
        Ok(CostMatrix { n, values })
    }

    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> f64) -> Result<Self> {
        let mut values = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                values.push(f(i, j));
            }
        }
        Self::from_row_major(n, values)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.n + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.n..(i + 1) * self.n]
    }

    pub fn negated(&self) -> CostMatrix {
        CostMatrix {
            n: self.n,
            values: self.values.iter().map(|v| -v).collect(),
        }
    }

    pub fn to_dense(&self) -> DenseMatrix {
        DenseMatrix::from_row_slice(self.n, self.n, &self.values)
    }

    /// `⟨C, P⟩`.
    pub fn inner(&self, plan: &TransportPlan) -> f64 {
        self.values.iter().zip(&plan.values).map(|(c, p)| c * p).sum()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DualPotentials {
    pub alpha: Vec<f64>,
    pub beta: Vec<f64>,
}

impl DualPotentials {
    pub fn constant(n: usize, v: f64) -> Self {
        DualPotentials {
            alpha: vec![v; n],
            beta: vec![v; n],
        }
    }
}

/// Relaxed correspondence: a nonnegative `n×n` matrix, row-major.
/// `P(i, j)` is the mass pairing estimate row `i` with observed row `j`.
#[derive(Clone, Debug, PartialEq)]
pub struct TransportPlan {
    n: usize,
    values: Vec<f64>,
}

impl TransportPlan {
    pub fn from_row_major(n: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != n * n {
            return Err(Error::SizeMismatch(n * n, values.len()));
        }
        Ok(TransportPlan { n, values })
    }

    pub fn zeros(n: usize) -> Self {
        TransportPlan { n, values: vec![0.0; n * n] }
    }

    pub fn uniform(n: usize) -> Self {
        TransportPlan {
            n,
            values: vec![1.0 / n as f64; n * n],
        }
    }

    /// Exact plan for an assignment: row `i` paired with column `assign(i)`.
    pub fn from_assignment(assign: &crate::perm::Permutation) -> Self {
        let n = assign.len();
        let mut values = vec![0.0; n * n];
        for i in 0..n {
            values[i * n + assign.get(i)] = 1.0;
        }
        TransportPlan { n, values }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.n + j]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn row_sums(&self) -> Vec<f64> {
        self.values.chunks(self.n.max(1)).map(|r| r.iter().sum()).collect()
    }

    pub fn col_sums(&self) -> Vec<f64> {
        let mut s = vec![0.0; self.n];
        for row in self.values.chunks(self.n.max(1)) {
            for (acc, v) in s.iter_mut().zip(row) {
                *acc += v;
            }
        }
        s
    }

    /// `max((1/√n)‖P1 − 1‖₂, (1/√n)‖Pᵀ1 − 1‖₂)`.
    pub fn marginal_residual(&self) -> f64 {
        let f = |s: Vec<f64>| (s.iter().map(|v| (v - 1.0).powi(2)).sum::<f64>() / self.n as f64).sqrt();
        f(self.row_sums()).max(f(self.col_sums()))
    }

    pub fn to_dense(&self) -> DenseMatrix {
        DenseMatrix::from_row_slice(self.n, self.n, &self.values)
    }

    /// Cost of rounding: `negated` plan viewed as a cost, for extracting the
    /// assignment of maximal total mass.
    pub fn as_negated_cost(&self) -> Result<CostMatrix> {
        CostMatrix::from_row_major(self.n, self.values.iter().map(|v| -v).collect())
    }
}

/// Outcome of a Sinkhorn solve.
#[derive(Clone, Debug)]
pub struct SinkhornOutput {
    pub duals: DualPotentials,
    pub plan: TransportPlan,
    pub iterations: usize,
    pub converged: bool,
    /// Row-marginal residual `(1/√n)‖P1 − 1‖₂` of the returned plan.
    pub residual: f64,
}

/// `C(i, j) = Σ_{j'' : (j, j'') ∈ Ω} (M̂_B(i, j'') − B_o(j, j''))²`.
pub fn masked_pair_cost(mhat_b: &DenseMatrix, b_obs: &MaskedMatrix) -> Result<CostMatrix> {
    if mhat_b.shape() != b_obs.shape() {
        return Err(Error::ShapeMismatch {
            expected: b_obs.shape(),
            got: mhat_b.shape(),
        });
    }
    let (n, m) = mhat_b.shape();
    let omega = DenseMatrix::from_fn(n, m, |j, k| if b_obs.mask.get(j, k) { 1.0 } else { 0.0 });
    let ob = omega.component_mul(&b_obs.data);
    let ob2 = ob.component_mul(&b_obs.data);
    let sq = mhat_b.component_mul(mhat_b);
    // (M̂∘M̂)Ωᵀ − 2 M̂ (Ω∘B)ᵀ + 1 (rowsum(Ω∘B²))ᵀ
    let mut c = &sq * omega.transpose();
    c.gemm(-2.0, mhat_b, &ob.transpose(), 1.0);
    let tail: Vec<f64> = (0..n).map(|j| ob2.row(j).sum()).collect();
    CostMatrix::from_fn(n, |i, j| (c[(i, j)] + tail[j]).max(0.0))
}

/// ε-soft minimum `min z − ε log Σ_j exp(−(z_j − min z)/ε)`.
pub fn soft_min(z: &[f64], eps: f64) -> f64 {
    let lo = z.iter().copied().fold(f64::INFINITY, f64::min);
    if !lo.is_finite() {
        return lo;
    }
    let s: f64 = z.iter().map(|&v| (-(v - lo) / eps).exp()).sum();
    lo - eps * s.ln()
}

#[inline]
fn soft_min_by(len: usize, eps: f64, f: impl Fn(usize) -> f64) -> f64 {
    let mut lo = f64::INFINITY;
    for k in 0..len {
        lo = lo.min(f(k));
    }
    if !lo.is_finite() {
        return lo;
    }
    let inv = 1.0 / eps;
    let mut s = 0.0;
    for k in 0..len {
        s += ((lo - f(k)) * inv).exp();
    }
    lo - eps * s.ln()
}

fn check_eps(eps: f64) -> Result<()> {
    if eps > 0.0 && eps.is_finite() {
        Ok(())
    } else {
        Err(invalid(format!("entropy coefficient must be positive, got {eps}")))
    }
}

/// Exact α-block maximizer: `α_i = softmin_j(C_ij − β_j)`.
pub fn update_alpha(c: &CostMatrix, beta: &[f64], eps: f64, alpha: &mut [f64]) {
    let n = c.n;
    for (i, a) in alpha.iter_mut().enumerate() {
        let row = c.row(i);
        *a = soft_min_by(n, eps, |j| row[j] - beta[j]);
    }
}

/// Exact β-block maximizer: `β_j = softmin_i(C_ij − α_i)`.
pub fn update_beta(c_t: &CostMatrix, alpha: &[f64], eps: f64, beta: &mut [f64]) {
    // c_t is the transposed cost so the inner loop stays contiguous
    update_alpha(c_t, alpha, eps, beta)
}

fn transpose(c: &CostMatrix) -> CostMatrix {
    let n = c.n;
    let mut values = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            values[j * n + i] = c.values[i * n + j];
        }
    }
    CostMatrix { n, values }
}

/// Log-domain Sinkhorn. One iteration is an α-update followed by a
/// β-update; after the β-update the column marginal is exact and the solve
/// stops once the row-marginal residual `(1/√n)‖P1 − 1‖₂` is at most `tol`.
///
/// Without `warm`, the duals start at `α = β = 1`.
pub fn sinkhorn_log(
    c: &CostMatrix,
    eps: f64,
    tol: f64,
    max_iter: usize,
    warm: Option<&DualPotentials>,
) -> Result<SinkhornOutput> {
    check_eps(eps)?;
    if max_iter == 0 {
        return Err(invalid("max_iter must be at least 1"));
    }
    let n = c.n;
    let mut duals = match warm {
        Some(d) if d.alpha.len() == n && d.beta.len() == n => d.clone(),
        Some(d) => return Err(Error::SizeMismatch(n, d.alpha.len())),
        None => DualPotentials::constant(n, 1.0),
    };
    let c_t = transpose(c);
    let mut next_alpha = vec![0.0; n];
    let mut iterations = 0;
    let mut converged = false;
    let mut residual;

    // The next α-update doubles as the row-marginal check:
    // row_sum_i = exp((α_i − α'_i)/ε).
    update_alpha(c, &duals.beta, eps, &mut next_alpha);
    loop {
        if iterations > 0 {
            residual = row_residual(&duals.alpha, &next_alpha, eps);
            if residual <= tol {
                converged = true;
                break;
            }
            if iterations >= max_iter {
                break;
            }
        }
        std::mem::swap(&mut duals.alpha, &mut next_alpha);
        update_beta(&c_t, &duals.alpha, eps, &mut duals.beta);
        iterations += 1;
        if duals.alpha.iter().chain(&duals.beta).any(|v| !v.is_finite()) {
            return Err(Error::SinkhornDiverged { iteration: iterations });
        }
        update_alpha(c, &duals.beta, eps, &mut next_alpha);
    }
    let plan = plan_from_duals(c, &duals, eps)?;
    Ok(SinkhornOutput {
        duals,
        plan,
        iterations,
        converged,
        residual,
    })
}

fn row_residual(alpha: &[f64], next_alpha: &[f64], eps: f64) -> f64 {
    let n = alpha.len() as f64;
    let s: f64 = alpha
        .iter()
        .zip(next_alpha)
        .map(|(a, b)| (((a - b) / eps).exp() - 1.0).powi(2))
        .sum();
    (s / n).sqrt()
}

/// `⟨1,α⟩ + ⟨1,β⟩ − ε Σ exp((α⊕β − C)/ε)`, with the exponential sum formed
/// as a log-sum-exp.
pub fn dual_objective(c: &CostMatrix, duals: &DualPotentials, eps: f64) -> f64 {
    let n = c.n;
    let mut lo = f64::NEG_INFINITY;
    for i in 0..n {
        for j in 0..n {
            lo = lo.max((duals.alpha[i] + duals.beta[j] - c.get(i, j)) / eps);
        }
    }
    let mut s = 0.0;
    for i in 0..n {
        for j in 0..n {
            s += ((duals.alpha[i] + duals.beta[j] - c.get(i, j)) / eps - lo).exp();
        }
    }
    let mass = if s > 0.0 { (lo + s.ln()).exp() } else { 0.0 };
    duals.alpha.iter().sum::<f64>() + duals.beta.iter().sum::<f64>() - eps * mass
}

/// `⟨C, P⟩ + ε Σ P(log P − 1)`.
pub fn primal_objective(c: &CostMatrix, plan: &TransportPlan, eps: f64) -> f64 {
    let ent: f64 = plan
        .values
        .iter()
        .map(|&p| if p > 0.0 { p * (p.ln() - 1.0) } else { 0.0 })
        .sum();
    c.inner(plan) + eps * ent
}

/// `P = exp((α⊕β − C)/ε)`.
pub fn plan_from_duals(c: &CostMatrix, duals: &DualPotentials, eps: f64) -> Result<TransportPlan> {
    check_eps(eps)?;
    let n = c.n;
    if duals.alpha.len() != n || duals.beta.len() != n {
        return Err(Error::SizeMismatch(n, duals.alpha.len()));
    }
    let inv = 1.0 / eps;
    let mut values = Vec::with_capacity(n * n);
    for i in 0..n {
        let a = duals.alpha[i];
        for j in 0..n {
            values.push(((a + duals.beta[j] - c.get(i, j)) * inv).exp());
        }
    }
    Ok(TransportPlan { n, values })
}

/// Gradient of `⟨C(M̂_B), P⟩` (equivalently of `W_ε` at fixed duals) with
/// respect to `M̂_B`:
/// `G(i, j'') = 2 Σ_j P(i, j) [(j, j'') ∈ Ω] (M̂_B(i, j'') − B_o(j, j''))`.
pub fn grad_entropic(mhat_b: &DenseMatrix, b_obs: &MaskedMatrix, plan: &TransportPlan) -> Result<DenseMatrix> {
    if mhat_b.shape() != b_obs.shape() {
        return Err(Error::ShapeMismatch {
            expected: b_obs.shape(),
            got: mhat_b.shape(),
        });
    }
    let (n, m) = mhat_b.shape();
    if plan.n != n {
        return Err(Error::SizeMismatch(n, plan.n));
    }
    let omega = DenseMatrix::from_fn(n, m, |j, k| if b_obs.mask.get(j, k) { 1.0 } else { 0.0 });
    let ob = omega.component_mul(&b_obs.data);
    let p = DMatrix::from_row_slice(n, n, &plan.values);
    let weight = &p * &omega;
    let target = &p * &ob;
    Ok((mhat_b.component_mul(&weight) - target) * 2.0)
}
