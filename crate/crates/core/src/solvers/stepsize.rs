//! Adaptive stepsize from how fast and how sharply the transport plan moves.

use serde::{Deserialize, Serialize};

use crate::eot::TransportPlan;
use crate::error::{Error, Result};

/// Smallest stepsize handed back, so a step never vanishes outright.
pub const RHO_FLOOR: f64 = 1e-6;

/// Which maxima measure how far a plan is from a permutation matrix.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sharpness {
    RowMax,
    ColMax,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepStats {
    pub rho: f64,
    /// `‖P_prev − P‖²_F / (2n)`.
    pub delta: f64,
    /// `‖max P − 1‖₁ / n`.
    pub c: f64,
}

/// `ρ = min(cap, (1 − δ)(1 − c)^ω)`, floored at [`RHO_FLOOR`].
pub fn adaptive_stepsize(
    prev: &TransportPlan,
    cur: &TransportPlan,
    omega: f64,
    cap: f64,
    sharpness: Sharpness,
) -> Result<StepStats> {
    let n = cur.n();
    if prev.n() != n {
        return Err(Error::SizeMismatch(prev.n(), n));
    }
    let nf = n as f64;
    let diff: f64 = prev.values().iter().zip(cur.values()).map(|(a, b)| (a - b).powi(2)).sum();
    let delta = diff / (2.0 * nf);
    let maxima: Vec<f64> = match sharpness {
        Sharpness::RowMax => (0..n).map(|i| (0..n).map(|j| cur.get(i, j)).fold(0.0, f64::max)).collect(),
        Sharpness::ColMax => (0..n).map(|j| (0..n).map(|i| cur.get(i, j)).fold(0.0, f64::max)).collect(),
    };
    let c = maxima.iter().map(|v| (v - 1.0).abs()).sum::<f64>() / nf;
    let raw = (1.0 - delta) * (1.0 - c).max(0.0).powf(omega);
    let rho = raw.min(cap).max(RHO_FLOOR.min(cap));
    Ok(StepStats { rho, delta, c })
}
