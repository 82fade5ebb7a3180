use log::{debug, info};
use rayon::prelude::*;

use super::schedule::{LambdaController, PatienceCounter};
use super::stepsize::adaptive_stepsize;
use super::{
    initial_estimate, lap_solve, objective_at_assignment, resolve_provider, BlockPartition, BlockSlots, CostProvider,
    RecoveryResult, ScheduleEvent, SolverConfig,
};
use crate::eot::{sinkhorn_log, CostMatrix, DualPotentials, TransportPlan};
use crate::error::{Error, Result};
use crate::lamat::{nuclear_norm, prox_nuclear_full, DenseMatrix, MaskedMatrix};
use crate::perm::Permutation;

struct GroupStep {
    cost: CostMatrix,
    plan: TransportPlan,
    duals: Option<DualPotentials>,
    grad: DenseMatrix,
    sinkhorn_iters: usize,
}

fn oracle(
    provider: &dyn CostProvider,
    g: usize,
    mhat: &DenseMatrix,
    obs: &MaskedMatrix,
    eps: f64,
    warm: Option<&DualPotentials>,
    cfg: &SolverConfig,
) -> Result<GroupStep> {
    let cost = provider.cost(g, mhat, obs)?;
    let (plan, duals, iters) = match &cfg.frozen_plans {
        Some(p) => (TransportPlan::from_assignment(&p[g]), None, 0),
        None => {
            let out = sinkhorn_log(&cost, eps, cfg.eps_tol, cfg.sinkhorn_max_iter, warm)?;
            if !out.converged {
                debug!("group {g}: sinkhorn stopped at residual {:.3e}", out.residual);
            }
            (out.plan, Some(out.duals), out.iterations)
        }
    };
    let grad = provider.gradient(g, mhat, obs, &plan)?;
    Ok(GroupStep {
        cost,
        plan,
        duals,
        grad,
        sinkhorn_iters: iters,
    })
}

fn run_oracles(
    provider: &dyn CostProvider,
    mhat: &DenseMatrix,
    obs: &MaskedMatrix,
    eps: f64,
    duals: &[Option<DualPotentials>],
    cfg: &SolverConfig,
) -> Result<Vec<GroupStep>> {
    (0..provider.groups())
        .into_par_iter()
        .map(|g| {
            let warm = if cfg.warm_start_duals { duals[g].as_ref() } else { None };
            oracle(provider, g, mhat, obs, eps, warm, cfg)
        })
        .collect()
}

/// Proximal gradient descent on `M̂` against an entropic max-oracle per
/// permuted group. Without a provider the groups are the column blocks of `part`.
pub fn solve_m3o(
    obs: &MaskedMatrix,
    part: &BlockPartition,
    cfg: &SolverConfig,
    provider: Option<&dyn CostProvider>,
) -> Result<RecoveryResult> {
    cfg.validate()?;
    let mut owned: Option<BlockSlots> = None;
    let provider = resolve_provider(obs, part, provider, &mut owned)?;
    let groups = provider.groups();
    if let Some(p) = &cfg.frozen_plans {
        if p.len() != groups || (0..groups).any(|g| p[g].len() != provider.slots(g)) {
            return Err(Error::SizeMismatch(groups, p.len()));
        }
    }

    let mut mhat = initial_estimate(obs, provider, cfg)?;
    let mut nuclear = nuclear_norm(&mhat)?;
    let mut eps = cfg.eps_ent_init;
    let mut lam_ctl = LambdaController::new(&cfg.lambda);
    let mut ent_counter = PatienceCounter::new(cfg.patience);
    let mut duals: Vec<Option<DualPotentials>> = vec![None; groups];
    let mut prev_plans: Vec<Option<TransportPlan>> = vec![None; groups];
    let mut res = RecoveryResult::new("m3o", DenseMatrix::zeros(0, 0));
    let mut quiet = 0usize;

    let abort = |iteration: usize, trace: &[f64], e: Error| Error::Aborted {
        iteration,
        objective_trace: trace.to_vec(),
        source: Box::new(e),
    };

    for k in 0..cfg.outer_iters {
        let lam = lam_ctl.current();
        let steps = run_oracles(provider, &mhat, obs, eps, &duals, cfg).map_err(|e| abort(k, &res.objective_trace, e))?;

        let mut objective = provider.anchor_residual(obs, &mhat) + lam * nuclear;
        for s in &steps {
            objective += s.cost.inner(&s.plan);
        }
        if !objective.is_finite() {
            return Err(abort(k, &res.objective_trace, Error::Numeric("non-finite objective".into())));
        }

        let mut next = mhat.clone();
        let mut rhos = Vec::with_capacity(groups);
        let mut iters = 0;
        for (g, s) in steps.into_iter().enumerate() {
            let rho = match cfg.rho_fixed {
                Some(r) => r,
                None => {
                    let prev = prev_plans[g].as_ref().unwrap_or(&s.plan);
                    adaptive_stepsize(prev, &s.plan, cfg.omega, cfg.step_cap, cfg.sharpness)?.rho
                }
            };
            let piece = provider.gather(g, &mhat) - s.grad * rho;
            provider.scatter(g, &piece, &mut next);
            rhos.push(rho);
            iters += s.sinkhorn_iters;
            prev_plans[g] = Some(s.plan);
            duals[g] = s.duals;
        }
        provider.impute_anchor(obs, &mut next);
        let shrink = if cfg.scale_prox_by_step {
            lam * rhos.iter().sum::<f64>() / groups as f64
        } else {
            lam
        };
        let shrunk = prox_nuclear_full(&next, shrink).map_err(|e| abort(k, &res.objective_trace, e))?;
        let change = (&shrunk.matrix - &mhat).norm() / mhat.norm().max(1.0);
        mhat = shrunk.matrix;
        nuclear = shrunk.nuclear;

        res.objective_trace.push(objective);
        res.stepsize_trace.push(rhos);
        res.entropy_trace.push(eps);
        res.lambda_trace.push(lam);
        res.sinkhorn_iters.push(iters);
        res.iterations = k + 1;

        if ent_counter.observe(objective) && cfg.decay_entropy {
            eps /= 2.0;
            res.events.push(ScheduleEvent {
                iteration: k,
                kind: "entropy".into(),
                value: eps,
            });
        }
        if let Some(l) = lam_ctl.observe(objective) {
            res.events.push(ScheduleEvent {
                iteration: k,
                kind: "lambda".into(),
                value: l,
            });
        }
        if let Some(tol) = cfg.stop_tol {
            quiet = if change <= tol { quiet + 1 } else { 0 };
            if quiet >= cfg.patience {
                res.converged = true;
                break;
            }
        }
    }

    // round the plans of the final estimate
    let finals = run_oracles(provider, &mhat, obs, eps, &duals, cfg)?;
    let lam = lam_ctl.current();
    let mut perms: Vec<Permutation> = Vec::with_capacity(groups);
    for s in &finals {
        perms.push(lap_solve(&s.plan.as_negated_cost()?).0);
    }
    res.final_objective = objective_at_assignment(provider, obs, &mhat, &perms, lam)?;
    info!(
        "m3o: {} iterations, final objective {:.6e}, {} schedule events",
        res.iterations,
        res.final_objective,
        res.events.len()
    );
    res.plans = finals.into_iter().map(|s| s.plan).collect();
    res.rounded_perms = perms;
    res.m_hat = mhat;
    Ok(res)
}
