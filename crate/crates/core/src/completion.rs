//! Soft-Impute: nuclear-norm regularized matrix completion by alternating
//! imputation of the unobserved entries and singular value soft-thresholding.

use crate::error::Result;
use crate::lamat::{impute, prox_nuclear_full, DenseMatrix, MaskedMatrix, Shrunk};

#[derive(Clone, Debug)]
pub struct SoftImputeOutput {
    pub matrix: DenseMatrix,
    pub nuclear: f64,
    pub iterations: usize,
    pub converged: bool,
    /// `½‖P_Ω(X − M̂)‖²_F + λ‖M̂‖_*` after each iteration.
    pub objective_trace: Vec<f64>,
}

/// One impute-then-shrink step: `prox_λ(P_Ω(X) + P_Ω^⊥(M̂))`.
pub fn soft_impute_step(x: &MaskedMatrix, mhat: &DenseMatrix, lam: f64) -> Result<Shrunk> {
    prox_nuclear_full(&impute(x, mhat), lam)
}

pub fn objective(x: &MaskedMatrix, mhat: &DenseMatrix, nuclear: f64, lam: f64) -> f64 {
    0.5 * x.observed_sq_residual(mhat) + lam * nuclear
}

/// Runs Soft-Impute from `init` (zero matrix when absent) until the relative
/// fixed-point change `‖M̂_new − M̂_old‖_F / max(1, ‖M̂_old‖_F)` drops to
/// `tol` or `max_iter` iterations have run.
pub fn soft_impute(
    x: &MaskedMatrix,
    lam: f64,
    tol: f64,
    max_iter: usize,
    init: Option<&DenseMatrix>,
) -> Result<SoftImputeOutput> {
    let (n, m) = x.shape();
    let mut mhat = match init {
        Some(m0) => m0.clone(),
        None => DenseMatrix::zeros(n, m),
    };
    let mut nuclear = 0.0;
    let mut trace = Vec::new();
    let mut converged = false;
    let mut iterations = 0;
    while iterations < max_iter {
        let next = soft_impute_step(x, &mhat, lam)?;
        iterations += 1;
        let change = (&next.matrix - &mhat).norm() / mhat.norm().max(1.0);
        mhat = next.matrix;
        nuclear = next.nuclear;
        trace.push(objective(x, &mhat, nuclear, lam));
        if change <= tol {
            converged = true;
            break;
        }
    }
    if iterations == 0 {
        nuclear = crate::lamat::nuclear_norm(&mhat)?;
    }
    Ok(SoftImputeOutput {
        matrix: mhat,
        nuclear,
        iterations,
        converged,
        objective_trace: trace,
    })
}

/// Soft-Impute along a decreasing sequence of `λ` values, each solve warm
/// started from the previous solution. Returns one output per `λ`.
pub fn soft_impute_path(
    x: &MaskedMatrix,
    lams: &[f64],
    tol: f64,
    max_iter: usize,
    init: Option<&DenseMatrix>,
) -> Result<Vec<SoftImputeOutput>> {
    let mut out: Vec<SoftImputeOutput> = Vec::with_capacity(lams.len());
    for &lam in lams {
        let start = out.last().map(|o| &o.matrix).or(init);
        out.push(soft_impute(x, lam, tol, max_iter, start)?);
    }
    Ok(out)
}
