use serde::{Deserialize, Serialize};
use unshuffle_core::completion::{soft_impute, soft_impute_path};
use unshuffle_core::data::Scenario;
use unshuffle_core::error::{invalid, Result};
use unshuffle_core::lamat::{hstack, DenseMatrix, MaskedMatrix};
use unshuffle_core::perm::Permutation;
use unshuffle_core::rng::seeded;
use unshuffle_core::solvers::{
    objective_at_assignment, solve_baseline, solve_m3o, solve_mus, BlockSlots, CostProvider, LambdaSchedule,
    RecoveryResult, SolverConfig,
};

/// Entropy coefficient of the `m3o-as` variant.
pub const AS_ENTROPY: f64 = 5e-4;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Algorithm {
    /// Adaptive stepsize with decaying entropy.
    M3o,
    /// Adaptive stepsize, entropy fixed at [`AS_ENTROPY`].
    M3oAs,
    /// Decaying entropy, constant stepsize.
    M3oDe,
    Baseline,
    Mus,
    /// Soft-Impute under the true correspondence.
    Oracle,
    /// Soft-Impute of every block on its own.
    Sic,
    /// Soft-Impute under a random correspondence.
    Sir,
}

impl Algorithm {
    pub fn name(self) -> &'static str {
        match self {
            Algorithm::M3o => "m3o",
            Algorithm::M3oAs => "m3o-as",
            Algorithm::M3oDe => "m3o-de",
            Algorithm::Baseline => "baseline",
            Algorithm::Mus => "mus",
            Algorithm::Oracle => "oracle",
            Algorithm::Sic => "sic",
            Algorithm::Sir => "sir",
        }
    }
}

/// Everything an algorithm run needs besides its seed.
pub struct RunInput<'a> {
    pub scenario: &'a Scenario,
    /// Custom slot layout; column blocks of the partition when absent.
    pub provider: Option<&'a dyn CostProvider>,
    pub config: &'a SolverConfig,
    pub de_stepsize: f64,
}

/// Soft-Impute at the config's `λ`, walking a decreasing schedule with warm starts.
pub fn complete(x: &MaskedMatrix, cfg: &SolverConfig) -> Result<(DenseMatrix, f64, usize)> {
    match cfg.lambda {
        LambdaSchedule::Fixed(l) => {
            let o = soft_impute(x, l, cfg.completion_tol, cfg.completion_max_iter, None)?;
            Ok((o.matrix, l, o.iterations))
        }
        LambdaSchedule::Decreasing {
            start,
            decrement,
            floor,
            ..
        } => {
            let mut lams = vec![start];
            while *lams.last().unwrap() > floor {
                lams.push((lams.last().unwrap() - decrement).max(floor));
            }
            let path = soft_impute_path(x, &lams, cfg.completion_tol, cfg.completion_max_iter, None)?;
            let iters = path.iter().map(|o| o.iterations).sum();
            let last = path.into_iter().last().ok_or_else(|| invalid("empty lambda path"))?;
            Ok((last.matrix, floor, iters))
        }
    }
}

fn with_alignment(
    name: &str,
    input: &RunInput,
    provider: &dyn CostProvider,
    perms: Vec<Permutation>,
) -> Result<RecoveryResult> {
    let obs = &input.scenario.observed;
    let x = provider.realign(obs, &perms)?;
    let (m, lam, iters) = complete(&x, input.config)?;
    let mut res = RecoveryResult::new(name, m);
    res.final_objective = objective_at_assignment(provider, obs, &res.m_hat, &perms, lam)?;
    res.iterations = iters;
    res.converged = true;
    res.rounded_perms = perms;
    Ok(res)
}

fn independent(input: &RunInput, provider: &dyn CostProvider) -> Result<RecoveryResult> {
    let obs = &input.scenario.observed;
    let spans = if input.provider.is_some() {
        vec![(0, obs.shape().1)]
    } else {
        input.scenario.partition.spans()
    };
    let mut parts = Vec::new();
    let mut iters = 0;
    let mut lam = 0.0;
    for (off, w) in spans.into_iter().filter(|s| s.1 > 0) {
        let (m, l, it) = complete(&obs.columns(off, w), input.config)?;
        parts.push(m);
        iters += it;
        lam = l;
    }
    let refs: Vec<&DenseMatrix> = parts.iter().collect();
    let perms: Vec<Permutation> = (0..provider.groups()).map(|g| Permutation::identity(provider.slots(g))).collect();
    let mut res = RecoveryResult::new("sic", hstack(&refs)?);
    res.final_objective = objective_at_assignment(provider, obs, &res.m_hat, &perms, lam)?;
    res.iterations = iters;
    res.converged = true;
    res.rounded_perms = perms;
    Ok(res)
}

/// Runs `alg` with `seed` as the initialization seed and scores it against
/// the scenario's ground truth when present.
pub fn run_algorithm(alg: Algorithm, input: &RunInput, seed: u64) -> Result<RecoveryResult> {
    let sc = input.scenario;
    let obs = &sc.observed;
    let part = &sc.partition;
    let mut cfg = input.config.clone();
    cfg.seed = seed;
    let owned;
    let provider: &dyn CostProvider = match input.provider {
        Some(p) => p,
        None => {
            owned = BlockSlots::column_blocks(obs.shape().0, part)?;
            &owned
        }
    };
    let truth = sc.truth.as_ref();
    let mut res = match alg {
        Algorithm::M3o => solve_m3o(obs, part, &cfg, input.provider)?,
        Algorithm::M3oAs => {
            cfg.decay_entropy = false;
            cfg.eps_ent_init = AS_ENTROPY;
            solve_m3o(obs, part, &cfg, input.provider)?
        }
        Algorithm::M3oDe => {
            cfg.rho_fixed = Some(input.de_stepsize);
            solve_m3o(obs, part, &cfg, input.provider)?
        }
        Algorithm::Baseline => solve_baseline(obs, part, &cfg, input.provider)?,
        Algorithm::Mus => {
            if input.provider.is_some() {
                return Err(invalid("mus needs column blocks"));
            }
            solve_mus(obs, part, &cfg)?
        }
        Algorithm::Oracle => {
            let t = truth.ok_or_else(|| invalid("oracle needs the true permutations"))?;
            with_alignment("oracle", input, provider, t.perms.clone())?
        }
        Algorithm::Sic => independent(input, provider)?,
        Algorithm::Sir => {
            let mut rng = seeded(seed);
            let perms = (0..provider.groups()).map(|g| Permutation::random(provider.slots(g), &mut rng)).collect();
            with_alignment("sir", input, provider, perms)?
        }
    };
    res.algorithm = alg.name().to_string();
    if let Some(t) = truth {
        res.score(Some(&t.perms), Some(&t.matrix), Some(&t.train_mask), Some(&t.test_mask))?;
    }
    Ok(res)
}
