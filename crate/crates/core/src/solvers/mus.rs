use log::info;
use rayon::prelude::*;

use super::{fill_blocks, lap_solve, objective_at_assignment, resolve_provider, BlockPartition, BlockSlots, RecoveryResult, SolverConfig};
use crate::completion::soft_impute;
use crate::eot::{CostMatrix, TransportPlan};
use crate::error::{invalid, Result};
use crate::lamat::{svd, DenseMatrix, MaskedMatrix};
use crate::perm::Permutation;

const PINV_TOL: f64 = 1e-10;

/// Row leverage scores `‖U_k(i)‖²` of the leading `k` left singular vectors.
fn leverage(x: &DenseMatrix, k: usize) -> Result<Vec<f64>> {
    let f = svd(x)?;
    let k = k.min(f.sigma.len());
    Ok((0..x.nrows()).map(|i| (0..k).map(|t| f.u[(i, t)].powi(2)).sum()).collect())
}

fn effective_rank(x: &DenseMatrix) -> Result<usize> {
    let f = svd(x)?;
    let top = f.sigma.iter().next().copied().unwrap_or(0.0);
    Ok(f.sigma.iter().filter(|&&s| s > 1e-6 * top).count())
}

/// Pairs rows with equal leverage rank: slot `i` of `a` takes the row of `b`
/// whose leverage has the same order statistic.
fn leverage_match(a: &DenseMatrix, b: &DenseMatrix) -> Result<Permutation> {
    let k = effective_rank(a)?.min(effective_rank(b)?).max(1);
    let la = leverage(a, k)?;
    let lb = leverage(b, k)?;
    let order = |l: &[f64]| {
        let mut idx: Vec<usize> = (0..l.len()).collect();
        idx.sort_by(|&i, &j| l[i].total_cmp(&l[j]).then(i.cmp(&j)));
        idx
    };
    let (oa, ob) = (order(&la), order(&lb));
    let mut map = vec![0; a.nrows()];
    for (ia, ib) in oa.into_iter().zip(ob) {
        map[ia] = ib;
    }
    Permutation::from_vec(map)
}

/// `min_{σ, W} ‖A − (P_σ B) W‖²_F` by alternating least squares in `W` and
/// exact assignment in `σ`, started from leverage-score matching.
/// Returns `σ` (slot `i` of `A` pairs with row `σ(i)` of `B`) and `W`.
pub fn shuffled_regression(a: &DenseMatrix, b: &DenseMatrix, max_iter: usize) -> Result<(Permutation, DenseMatrix)> {
    if a.nrows() != b.nrows() {
        return Err(crate::Error::SizeMismatch(a.nrows(), b.nrows()));
    }
    let n = a.nrows();
    let mut sigma = leverage_match(a, b)?;
    let mut w = DenseMatrix::zeros(b.ncols(), a.ncols());
    let a_sq: Vec<f64> = (0..n).map(|i| a.row(i).norm_squared()).collect();
    for _ in 0..max_iter.max(1) {
        let bs = sigma.inverse_gather(b);
        w = bs
            .pseudo_inverse(PINV_TOL)
            .map_err(|e| crate::Error::Numeric(e.to_string()))?
            * a;
        let bw = b * &w;
        let cross = a * bw.transpose();
        let bw_sq: Vec<f64> = (0..n).map(|j| bw.row(j).norm_squared()).collect();
        let c = CostMatrix::from_fn(n, |i, j| (a_sq[i] + bw_sq[j] - 2.0 * cross[(i, j)]).max(0.0))?;
        let next = lap_solve(&c).0;
        if next == sigma {
            break;
        }
        sigma = next;
    }
    Ok((sigma, w))
}

trait GatherRows {
    fn inverse_gather(&self, x: &DenseMatrix) -> DenseMatrix;
}

impl GatherRows for Permutation {
    /// Row `i` of the result is row `self(i)` of `x`.
    fn inverse_gather(&self, x: &DenseMatrix) -> DenseMatrix {
        DenseMatrix::from_fn(x.nrows(), x.ncols(), |i, j| x[(self.get(i), j)])
    }
}

/// Independent Soft-Impute fill of every block, shuffled regression of the
/// anchor onto each permuted block in turn, then completion of the observation
/// realigned under the recovered correspondences.
pub fn solve_mus(obs: &MaskedMatrix, part: &BlockPartition, cfg: &SolverConfig) -> Result<RecoveryResult> {
    cfg.validate()?;
    if part.anchor == 0 {
        return Err(invalid("shuffled regression needs a non-empty anchor block"));
    }
    let mut owned: Option<BlockSlots> = None;
    let provider = resolve_provider(obs, part, None, &mut owned)?;
    let lam = cfg.lambda.initial();
    let filled = fill_blocks(obs, &part.spans(), lam, cfg)?;
    let a = filled.columns(0, part.anchor).into_owned();
    let perms: Vec<Permutation> = (0..part.d())
        .into_par_iter()
        .map(|l| {
            let b = filled.columns(part.offset(l), part.widths[l]).into_owned();
            shuffled_regression(&a, &b, cfg.outer_iters).map(|(s, _)| s)
        })
        .collect::<Result<_>>()?;
    let x = provider.realign(obs, &perms)?;
    let mhat = soft_impute(&x, lam, cfg.completion_tol, cfg.completion_max_iter, None)?.matrix;
    let mut res = RecoveryResult::new("mus", DenseMatrix::zeros(0, 0));
    res.final_objective = objective_at_assignment(provider, obs, &mhat, &perms, lam)?;
    res.objective_trace.push(res.final_objective);
    res.stepsize_trace.push(Vec::new());
    res.entropy_trace.push(0.0);
    res.lambda_trace.push(lam);
    res.sinkhorn_iters.push(0);
    res.iterations = 1;
    res.converged = true;
    info!("mus: final objective {:.6e}", res.final_objective);
    res.plans = perms.iter().map(TransportPlan::from_assignment).collect();
    res.rounded_perms = perms;
    res.m_hat = mhat;
    Ok(res)
}
