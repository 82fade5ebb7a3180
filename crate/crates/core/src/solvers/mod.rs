//! End-to-end recovery algorithms.
//!
//! * [`solve_m3o`]: proximal gradient on the matrix estimate against an
//!   entropic-transport max-oracle per permuted block, with an adaptive
//!   stepsize and a decaying entropy coefficient.
//! * [`solve_baseline`]: alternating exact assignment and Soft-Impute.
//! * [`solve_mus`]: per-block shuffled regression of the anchor onto each
//!   permuted block, after independent Soft-Impute pre-fill.

mod baseline;
mod lap;
mod m3o;
mod model;
mod mus;
mod schedule;
mod stepsize;

pub use baseline::solve_baseline;
pub use lap::lap_solve;
pub use m3o::solve_m3o;
pub use model::{BlockSlots, CostProvider};
pub use mus::solve_mus;
pub use schedule::{LambdaController, PatienceCounter};
pub use stepsize::{adaptive_stepsize, Sharpness, StepStats};

use serde::{Deserialize, Serialize};

use crate::completion::soft_impute;
use crate::eot::TransportPlan;
use crate::error::{invalid, Result};
use crate::lamat::{hstack, svd, DenseMatrix, Mask, MaskedMatrix};
use crate::perm::{d_hamming, Permutation};
use crate::rng::{gaussian_matrix, seeded};

/// Column layout `[A, B_1, …, B_d]`: an anchor block of width `anchor`
/// followed by `d` row-permuted blocks.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockPartition {
    pub anchor: usize,
    pub widths: Vec<usize>,
}

impl BlockPartition {
    pub fn new(anchor: usize, widths: Vec<usize>) -> Result<Self> {
        if widths.is_empty() {
            return Err(invalid("partition needs at least one permuted block"));
        }
        if widths.contains(&0) {
            return Err(invalid("permuted block widths must be positive"));
        }
        Ok(BlockPartition { anchor, widths })
    }

    pub fn d(&self) -> usize {
        self.widths.len()
    }

    pub fn total(&self) -> usize {
        self.anchor + self.widths.iter().sum::<usize>()
    }

    /// Column offset of permuted block `l`.
    pub fn offset(&self, l: usize) -> usize {
        self.anchor + self.widths[..l].iter().sum::<usize>()
    }

    pub fn check_width(&self, cols: usize) -> Result<()> {
        if self.widths.is_empty() || self.widths.contains(&0) {
            return Err(invalid("malformed partition"));
        }
        if self.total() != cols {
            return Err(invalid(format!("partition covers {} columns but matrix has {cols}", self.total())));
        }
        Ok(())
    }

    /// `(offset, width)` of the anchor followed by every permuted block.
    pub fn spans(&self) -> Vec<(usize, usize)> {
        let mut out = vec![(0, self.anchor)];
        out.extend((0..self.d()).map(|l| (self.offset(l), self.widths[l])));
        out
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LambdaSchedule {
    Fixed(f64),
    /// Start at `start`; after `patience` non-improving iterations subtract
    /// `decrement`, never going below `floor`.
    Decreasing {
        start: f64,
        decrement: f64,
        floor: f64,
        patience: usize,
    },
}

impl LambdaSchedule {
    pub fn initial(&self) -> f64 {
        match *self {
            LambdaSchedule::Fixed(l) => l,
            LambdaSchedule::Decreasing { start, .. } => start,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitStrategy {
    /// i.i.d. standard normal entries drawn from the config seed.
    Gaussian,
    /// Independent Soft-Impute of each block, then its best rank-1 approximation.
    SpectralRank1,
    /// Independent Soft-Impute of each block.
    BlockFill,
    /// `SolverConfig::init_matrix`.
    Provided,
}

/// Every schedule and tolerance knob of the solvers.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    /// Stepsize exponent `ω`.
    pub omega: f64,
    /// Outer iterations `N`.
    pub outer_iters: usize,
    /// Non-improving iterations `K` before the entropy is halved.
    pub patience: usize,
    pub eps_ent_init: f64,
    pub decay_entropy: bool,
    /// Sinkhorn marginal tolerance.
    pub eps_tol: f64,
    pub sinkhorn_max_iter: usize,
    pub lambda: LambdaSchedule,
    pub step_cap: f64,
    /// Constant stepsize replacing the adaptive rule.
    pub rho_fixed: Option<f64>,
    pub seed: u64,
    pub init: InitStrategy,
    #[serde(skip)]
    pub init_matrix: Option<DenseMatrix>,
    /// Exact plans used in place of the entropic oracle, one per group.
    #[serde(skip)]
    pub frozen_plans: Option<Vec<Permutation>>,
    /// Reuse the previous outer iteration's duals instead of restarting at `α = β = 1`.
    pub warm_start_duals: bool,
    /// Use `prox_{ρλ}` instead of `prox_λ` after the gradient step.
    pub scale_prox_by_step: bool,
    pub sharpness: Sharpness,
    /// Soft-Impute sweeps per Baseline outer iteration (`N_p`).
    pub inner_iters: usize,
    /// Tolerance and cap for standalone Soft-Impute fills.
    pub completion_tol: f64,
    pub completion_max_iter: usize,
    /// Stop once the relative change of the estimate stays below this for
    /// `patience` consecutive iterations.
    pub stop_tol: Option<f64>,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            omega: 3.0,
            outer_iters: 1000,
            patience: 100,
            eps_ent_init: 0.1,
            decay_entropy: true,
            eps_tol: crate::eot::DEFAULT_TOL,
            sinkhorn_max_iter: crate::eot::DEFAULT_MAX_ITER,
            lambda: LambdaSchedule::Fixed(0.5),
            step_cap: 0.5,
            rho_fixed: None,
            seed: 0,
            init: InitStrategy::Gaussian,
            init_matrix: None,
            frozen_plans: None,
            warm_start_duals: false,
            scale_prox_by_step: false,
            sharpness: Sharpness::RowMax,
            inner_iters: 10,
            completion_tol: 1e-5,
            completion_max_iter: 500,
            stop_tol: None,
        }
    }
}

impl SolverConfig {
    /// Synthetic-data defaults: `ε₀ = 0.1`, `K = 100`, `ω = 3`, fixed `λ`.
    pub fn synthetic(lambda: f64) -> Self {
        SolverConfig {
            lambda: LambdaSchedule::Fixed(lambda),
            ..Default::default()
        }
    }

    /// MovieLens defaults: `ω = 0.5`, `λ` from 300 down by 10 after 10
    /// stalled steps to a floor of 10, fixed `ε = 0.05`.
    pub fn movielens() -> Self {
        SolverConfig {
            omega: 0.5,
            eps_ent_init: 0.05,
            decay_entropy: false,
            lambda: LambdaSchedule::Decreasing {
                start: 300.0,
                decrement: 10.0,
                floor: 10.0,
                patience: 10,
            },
            ..Default::default()
        }
    }

    /// Image-block defaults: `ε₀ = 100`, `ρ = 0.1`, rank-1 spectral init.
    pub fn image_blocks() -> Self {
        SolverConfig {
            eps_ent_init: 100.0,
            rho_fixed: Some(0.1),
            init: InitStrategy::SpectralRank1,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let pos = |v: f64, name: &str| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(invalid(format!("{name} must be positive, got {v}")))
            }
        };
        pos(self.omega, "omega")?;
        pos(self.eps_ent_init, "eps_ent_init")?;
        pos(self.eps_tol, "eps_tol")?;
        if !(self.step_cap > 0.0 && self.step_cap <= 1.0) {
            return Err(invalid(format!("step_cap must lie in (0, 1], got {}", self.step_cap)));
        }
        if let Some(r) = self.rho_fixed {
            pos(r, "rho_fixed")?;
        }
        if self.sinkhorn_max_iter == 0 || self.patience == 0 {
            return Err(invalid("sinkhorn_max_iter and patience must be positive"));
        }
        let lam_ok = match self.lambda {
            LambdaSchedule::Fixed(l) => l >= 0.0,
            LambdaSchedule::Decreasing {
                start,
                decrement,
                floor,
                patience,
            } => start >= floor && floor >= 0.0 && decrement > 0.0 && patience > 0,
        };
        if !lam_ok {
            return Err(invalid(format!("malformed lambda schedule {:?}", self.lambda)));
        }
        if self.init == InitStrategy::Provided && self.init_matrix.is_none() {
            return Err(invalid("init strategy `provided` needs an init matrix"));
        }
        Ok(())
    }
}

/// A logged change of the entropy coefficient or of `λ`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScheduleEvent {
    pub iteration: usize,
    pub kind: String,
    pub value: f64,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct Metrics {
    pub d_hamming: Vec<usize>,
    /// `Σ_l d_H(π̂_l, π_l) / d`.
    pub norm_perm_err: Option<f64>,
    pub rmse_train: Option<f64>,
    pub rmse_test: Option<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RecoveryResult {
    pub algorithm: String,
    #[serde(skip)]
    pub m_hat: DenseMatrix,
    #[serde(skip)]
    pub plans: Vec<TransportPlan>,
    /// Estimated shuffle per block: slot `i` of the estimate holds observed row `π̂(i)`.
    pub rounded_perms: Vec<Permutation>,
    /// Entropy-free objective per outer iteration.
    pub objective_trace: Vec<f64>,
    /// Stepsize per outer iteration and block.
    pub stepsize_trace: Vec<Vec<f64>>,
    pub entropy_trace: Vec<f64>,
    pub lambda_trace: Vec<f64>,
    pub sinkhorn_iters: Vec<usize>,
    pub events: Vec<ScheduleEvent>,
    /// `‖P_Ω(A_o − M̂_A)‖² + Σ_l ⟨C_l(M̂), P̂_l⟩ + λ‖M̂‖_*` at the rounded permutations.
    pub final_objective: f64,
    pub iterations: usize,
    pub converged: bool,
    pub metrics: Metrics,
}

impl RecoveryResult {
    /// Empty traces, `NaN` objective, no metrics.
    pub fn new(algorithm: &str, m_hat: DenseMatrix) -> Self {
        RecoveryResult {
            algorithm: algorithm.to_string(),
            m_hat,
            plans: Vec::new(),
            rounded_perms: Vec::new(),
            objective_trace: Vec::new(),
            stepsize_trace: Vec::new(),
            entropy_trace: Vec::new(),
            lambda_trace: Vec::new(),
            sinkhorn_iters: Vec::new(),
            events: Vec::new(),
            final_objective: f64::NAN,
            iterations: 0,
            converged: false,
            metrics: Metrics::default(),
        }
    }

    /// Fills `metrics` against the true shuffles and, optionally, the true
    /// matrix with train/test masks in truth coordinates.
    pub fn score(
        &mut self,
        true_perms: Option<&[Permutation]>,
        truth: Option<&DenseMatrix>,
        train: Option<&Mask>,
        test: Option<&Mask>,
    ) -> Result<()> {
        if let Some(tp) = true_perms {
            if tp.len() != self.rounded_perms.len() {
                return Err(crate::Error::SizeMismatch(tp.len(), self.rounded_perms.len()));
            }
            let d: Vec<usize> = self
                .rounded_perms
                .iter()
                .zip(tp)
                .map(|(a, b)| d_hamming(a, b))
                .collect::<Result<_>>()?;
            self.metrics.norm_perm_err = Some(d.iter().sum::<usize>() as f64 / d.len().max(1) as f64);
            self.metrics.d_hamming = d;
        }
        if let Some(m) = truth {
            self.metrics.rmse_train = train.and_then(|mask| masked_rmse(&self.m_hat, m, mask));
            self.metrics.rmse_test = test.and_then(|mask| masked_rmse(&self.m_hat, m, mask));
        }
        Ok(())
    }
}

/// Root mean squared difference over the entries of `mask`; `None` on an empty mask.
pub fn masked_rmse(a: &DenseMatrix, b: &DenseMatrix, mask: &Mask) -> Option<f64> {
    if mask.count() == 0 {
        return None;
    }
    let s: f64 = mask.indices().iter().map(|&(i, j)| (a[(i, j)] - b[(i, j)]).powi(2)).sum();
    Some((s / mask.count() as f64).sqrt())
}

/// Independent Soft-Impute of each column span, reassembled side by side.
pub fn fill_blocks(obs: &MaskedMatrix, spans: &[(usize, usize)], lam: f64, cfg: &SolverConfig) -> Result<DenseMatrix> {
    let parts: Vec<DenseMatrix> = spans
        .iter()
        .filter(|(_, w)| *w > 0)
        .map(|&(off, w)| {
            soft_impute(&obs.columns(off, w), lam, cfg.completion_tol, cfg.completion_max_iter, None).map(|o| o.matrix)
        })
        .collect::<Result<_>>()?;
    let refs: Vec<&DenseMatrix> = parts.iter().collect();
    hstack(&refs)
}

pub(crate) fn initial_estimate(obs: &MaskedMatrix, provider: &dyn CostProvider, cfg: &SolverConfig) -> Result<DenseMatrix> {
    let (n, m) = obs.shape();
    match cfg.init {
        InitStrategy::Gaussian => Ok(gaussian_matrix(&mut seeded(cfg.seed), n, m)),
        InitStrategy::Provided => {
            let m0 = cfg.init_matrix.clone().ok_or_else(|| invalid("missing init matrix"))?;
            if m0.shape() != (n, m) {
                return Err(crate::Error::ShapeMismatch { expected: (n, m), got: m0.shape() });
            }
            Ok(m0)
        }
        InitStrategy::BlockFill => provider.independent_fill(obs, cfg.lambda.initial(), cfg),
        InitStrategy::SpectralRank1 => {
            let filled = provider.independent_fill(obs, cfg.lambda.initial(), cfg)?;
            let f = svd(&filled)?;
            let mut out = DenseMatrix::zeros(n, m);
            if !f.sigma.is_empty() {
                out.ger(f.sigma[0], &f.u.column(0), &f.v.column(0), 0.0);
            }
            Ok(out)
        }
    }
}

/// Entropy-free objective at exact assignments:
/// anchor misfit plus each group's assignment cost plus `λ‖M̂‖_*`.
pub fn objective_at_assignment(
    provider: &dyn CostProvider,
    obs: &MaskedMatrix,
    mhat: &DenseMatrix,
    assign: &[Permutation],
    lam: f64,
) -> Result<f64> {
    let mut total = provider.anchor_residual(obs, mhat);
    for (g, a) in assign.iter().enumerate() {
        let c = provider.cost(g, mhat, obs)?;
        total += (0..a.len()).map(|i| c.get(i, a.get(i))).sum::<f64>();
    }
    Ok(total + lam * crate::lamat::nuclear_norm(mhat)?)
}

pub(crate) fn resolve_provider<'a>(
    obs: &MaskedMatrix,
    part: &BlockPartition,
    provider: Option<&'a dyn CostProvider>,
    owned: &'a mut Option<BlockSlots>,
) -> Result<&'a dyn CostProvider> {
    part.check_width(obs.shape().1)?;
    let p: &dyn CostProvider = match provider {
        Some(p) => p,
        None => owned.insert(BlockSlots::column_blocks(obs.shape().0, part)?),
    };
    if p.shape() != obs.shape() {
        return Err(crate::Error::ShapeMismatch {
            expected: obs.shape(),
            got: p.shape(),
        });
    }
    Ok(p)
}
