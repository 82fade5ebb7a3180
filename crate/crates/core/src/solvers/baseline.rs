use log::info;
use rayon::prelude::*;

use super::schedule::LambdaController;
use super::{
    initial_estimate, lap_solve, objective_at_assignment, resolve_provider, BlockPartition, BlockSlots, CostProvider, RecoveryResult,
    ScheduleEvent, SolverConfig,
};
use crate::completion::{soft_impute, soft_impute_step};
use crate::eot::TransportPlan;
use crate::error::Result;
use crate::lamat::MaskedMatrix;
use crate::perm::Permutation;

/// Alternates exact assignment of every block against the current estimate
/// with `N_p` Soft-Impute sweeps on the realigned observation, until the
/// assignments stop changing under a settled `λ`. The last alignment is
/// then completed to convergence.
pub fn solve_baseline(
    obs: &MaskedMatrix,
    part: &BlockPartition,
    cfg: &SolverConfig,
    provider: Option<&dyn CostProvider>,
) -> Result<RecoveryResult> {
    cfg.validate()?;
    let mut owned: Option<BlockSlots> = None;
    let provider = resolve_provider(obs, part, provider, &mut owned)?;
    let groups = provider.groups();
    let mut mhat = initial_estimate(obs, provider, cfg)?;
    let mut lam_ctl = LambdaController::new(&cfg.lambda);
    let mut res = RecoveryResult::new("baseline", mhat.clone());
    let mut prev: Option<Vec<Permutation>> = None;

    for k in 0..cfg.outer_iters {
        let lam = lam_ctl.current();
        let perms: Vec<Permutation> = (0..groups)
            .into_par_iter()
            .map(|g| provider.cost(g, &mhat, obs).map(|c| lap_solve(&c).0))
            .collect::<Result<_>>()?;
        let objective = objective_at_assignment(provider, obs, &mhat, &perms, lam)?;
        res.objective_trace.push(objective);
        res.stepsize_trace.push(Vec::new());
        res.entropy_trace.push(0.0);
        res.lambda_trace.push(lam);
        res.sinkhorn_iters.push(0);
        res.iterations = k + 1;
        if prev.as_ref() == Some(&perms) && lam_ctl.settled() {
            res.converged = true;
            break;
        }
        let x = provider.realign(obs, &perms)?;
        for _ in 0..cfg.inner_iters.max(1) {
            mhat = soft_impute_step(&x, &mhat, lam)?.matrix;
        }
        prev = Some(perms);
        if let Some(l) = lam_ctl.observe(objective) {
            res.events.push(ScheduleEvent {
                iteration: k,
                kind: "lambda".into(),
                value: l,
            });
        }
    }

    let perms = match prev {
        Some(p) => p,
        None => (0..groups)
            .map(|g| provider.cost(g, &mhat, obs).map(|c| lap_solve(&c).0))
            .collect::<Result<_>>()?,
    };
    let lam = lam_ctl.current();
    let x = provider.realign(obs, &perms)?;
    mhat = soft_impute(&x, lam, cfg.completion_tol, cfg.completion_max_iter, Some(&mhat))?.matrix;
    res.final_objective = objective_at_assignment(provider, obs, &mhat, &perms, lam)?;
    info!("baseline: {} iterations, final objective {:.6e}", res.iterations, res.final_objective);
    res.plans = perms.iter().map(TransportPlan::from_assignment).collect();
    res.rounded_perms = perms;
    res.m_hat = mhat;
    Ok(res)
}
