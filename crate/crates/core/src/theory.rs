//! Numeric checks of the rank and nuclear-norm theory behind permutation
//! recovery, plus an exhaustive nuclear-norm minimizer for tiny instances.

use nalgebra::DVector;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::completion::soft_impute;
use crate::data::uniform_mask;
use crate::error::{invalid, Error, Result};
use crate::lamat::{hstack, impute, nuclear_norm, numeric_rank, svd, DenseMatrix, MaskedMatrix};
use crate::perm::{Permutation, Sparsity};
use crate::rng::{derive_seed, gaussian_matrix, seeded, Rng64};
use crate::solvers::BlockPartition;

/// Singular values closer than this make the matching singular vector ill-defined.
pub const SIGMA_GAP_TOL: f64 = 1e-6;

/// Largest `n` accepted by [`brute_force_min_nuclear`].
pub const BRUTE_FORCE_MAX_N: usize = 9;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TheoremInputs {
    pub eps1: f64,
    pub eps2: f64,
    pub eps3: f64,
    /// `min(r_A, r_B)`.
    pub t: usize,
    /// Rank of `[A, B]`.
    pub r: usize,
    pub r_a: usize,
    pub r_b: usize,
    /// `‖A‖_* + ‖B‖_*`.
    pub d: f64,
    pub n_big: f64,
    pub z_small: f64,
    /// `max(n, m)`.
    pub l: usize,
    pub sigma_noise: f64,
    /// Some index `i ≤ T` had a singular value gap below [`SIGMA_GAP_TOL`]
    /// and was left out of `eps2`.
    pub degenerate: bool,
}

fn min_entry_gap(u: &[f64]) -> f64 {
    let mut v = u.to_vec();
    v.sort_by(f64::total_cmp);
    v.windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min)
}

fn gap_ok(sigma: &[f64], i: usize) -> bool {
    let scale = sigma.first().copied().unwrap_or(0.0).max(1.0);
    let left = i == 0 || (sigma[i - 1] - sigma[i]).abs() > SIGMA_GAP_TOL * scale;
    let right = i + 1 >= sigma.len() || (sigma[i] - sigma[i + 1]).abs() > SIGMA_GAP_TOL * scale;
    left && right
}

/// The constants of the three structural assumptions for the pair `(A, B)`.
pub fn assumption_constants(a: &DenseMatrix, b: &DenseMatrix, sigma_noise: f64) -> Result<TheoremInputs> {
    if a.nrows() != b.nrows() {
        return Err(Error::SizeMismatch(a.nrows(), b.nrows()));
    }
    let fa = svd(a)?;
    let fb = svd(b)?;
    let r_a = fa.numeric_rank();
    let r_b = fb.numeric_rank();
    let r = numeric_rank(&hstack(&[a, b])?)?;
    let t = r_a.min(r_b);
    let sa: Vec<f64> = fa.sigma.iter().copied().collect();
    let sb: Vec<f64> = fb.sigma.iter().copied().collect();
    let pad = |s: &[f64], rank: usize, i: usize| if i < rank { s[i] } else { 0.0 };
    let eps1 = (0..r.max(1))
        .map(|i| (pad(&sa, r_a, i) - pad(&sb, r_b, i)).abs())
        .fold(0.0, f64::max);
    let mut eps2: f64 = 0.0;
    let mut degenerate = false;
    for i in 0..t {
        if !gap_ok(&sa, i) || !gap_ok(&sb, i) {
            degenerate = true;
            continue;
        }
        let ua = fa.u.column(i);
        let ub = fb.u.column(i);
        let sign = if ua.dot(&ub) < 0.0 { -1.0 } else { 1.0 };
        eps2 = eps2.max((ua - ub * sign).norm());
    }
    let mut eps3 = f64::INFINITY;
    for i in 0..t {
        eps3 = eps3.min(min_entry_gap(fa.u.column(i).as_slice()));
        eps3 = eps3.min(min_entry_gap(fb.u.column(i).as_slice()));
    }
    if !eps3.is_finite() {
        eps3 = 0.0;
    }
    let na: f64 = sa.iter().sum();
    let nb: f64 = sb.iter().sum();
    Ok(TheoremInputs {
        eps1,
        eps2,
        eps3,
        t,
        r,
        r_a,
        r_b,
        d: na + nb,
        n_big: na.max(nb),
        z_small: na.min(nb),
        l: a.nrows().max(a.ncols() + b.ncols()),
        sigma_noise,
        degenerate,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ErrorBound {
    /// Upper bound on the Hamming distance; `+∞` when `eps3 = 0`.
    pub bound: f64,
    pub prob: f64,
    /// The side conditions on `eps1`, `eps2`, `eps3` and the noise level hold.
    pub assumptions_ok: bool,
    pub note: Option<String>,
}

/// Hamming-distance bound for the nuclear-norm minimizer and the
/// probability it holds with:
/// `(2/ε₃²)(2 − (√2D/(D + (√2+2)ε₁r + √2ε₂N + 2√(2DLσ)) − √T ε₂)²)`,
/// `1 − 2exp(−D/(8Lσ))`. The side conditions take `D` as the matrix scale.
pub fn theorem_error_bound(inp: &TheoremInputs) -> ErrorBound {
    let s2 = std::f64::consts::SQRT_2;
    let (d, l, sigma) = (inp.d, inp.l as f64, inp.sigma_noise);
    let r = inp.r as f64;
    let t = inp.t as f64;
    let prob = if sigma > 0.0 {
        1.0 - 2.0 * (-d / (8.0 * l * sigma)).exp()
    } else {
        1.0
    };
    let side = inp.eps1 <= d / (4.0 * r.max(1.0))
        && inp.eps2 <= (1.0 / (2.0 * (2.0 * t.max(1.0)).sqrt())).min(s2 * d / (2.0 * inp.n_big))
        && sigma <= d / (16.0 * l * l);
    if inp.eps3 <= 0.0 {
        return ErrorBound {
            bound: f64::INFINITY,
            prob,
            assumptions_ok: false,
            note: Some("eps3 = 0: some singular vector has repeated entries".into()),
        };
    }
    let denom = d + (s2 + 2.0) * inp.eps1 * r + s2 * inp.eps2 * inp.n_big + 2.0 * (2.0 * d * l * sigma).sqrt();
    let inner = s2 * d / denom - t.sqrt() * inp.eps2;
    let bound = (2.0 / (inp.eps3 * inp.eps3) * (2.0 - inner * inner)).max(0.0);
    ErrorBound {
        bound,
        prob,
        assumptions_ok: side,
        note: None,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SandwichReport {
    /// `‖[A, PB]‖_*`.
    pub value: f64,
    /// `(‖A‖_* + ‖B‖_*)/√2`.
    pub lower: f64,
    /// `‖A‖_* + ‖B‖_*`.
    pub upper: f64,
    pub lower_slack: f64,
    pub upper_slack: f64,
    /// `(‖[A, PB]‖_* − ‖M‖_*)/‖M‖_*` with `M = [A, B]`.
    pub relative_change: f64,
    /// `Z/N`, the bound on `|relative_change|`.
    pub relative_bound: f64,
}

impl SandwichReport {
    /// Both inequalities, up to `1e-12` relative rounding.
    pub fn holds(&self) -> bool {
        let tol = 1e-12 * self.upper.max(1.0);
        self.lower_slack >= -tol && self.upper_slack >= -tol
    }
}

pub fn nuclear_sandwich_check(a: &DenseMatrix, b: &DenseMatrix, p: &Permutation) -> Result<SandwichReport> {
    let na = nuclear_norm(a)?;
    let nb = nuclear_norm(b)?;
    let pb = p.apply_rows(b)?;
    let value = nuclear_norm(&hstack(&[a, &pb])?)?;
    let m = nuclear_norm(&hstack(&[a, b])?)?;
    let lower = (na + nb) / std::f64::consts::SQRT_2;
    let upper = na + nb;
    let (big, small) = (na.max(nb), na.min(nb));
    Ok(SandwichReport {
        value,
        lower,
        upper,
        lower_slack: value - lower,
        upper_slack: upper - value,
        relative_change: if m > 0.0 { (value - m) / m } else { 0.0 },
        relative_bound: if big > 0.0 { small / big } else { 0.0 },
    })
}

/// `min{2r, r + H(π) − C(π)}`.
pub fn predicted_generic_rank(r: usize, p: &Permutation) -> usize {
    let s = p.cycle_stats();
    (2 * r).min(r + s.h - s.c)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GenericRankReport {
    pub trials: usize,
    pub matches: usize,
    pub fraction: f64,
    /// `(predicted, observed)` for every mismatching trial.
    pub mismatches: Vec<(usize, usize)>,
}

/// One draw of `M = RE` and `P`, returning `(predicted, observed)` rank of `[A, PB]`.
pub fn generic_rank_trial(seed: u64, n: usize, m_a: usize, m_b: usize, r: usize, sparsity: Sparsity) -> Result<(usize, usize)> {
    let mut rng = seeded(seed);
    let rf = gaussian_matrix(&mut rng, n, r);
    let e = gaussian_matrix(&mut rng, r, m_a + m_b);
    let p = Permutation::sample(n, sparsity, &mut rng)?;
    let m = &rf * &e;
    let a = m.columns(0, m_a).into_owned();
    let pb = p.apply_rows(&m.columns(m_a, m_b).into_owned())?;
    Ok((predicted_generic_rank(r, &p), numeric_rank(&hstack(&[&a, &pb])?)?))
}

/// Fraction of random `(R, E, P)` draws, with uniformly random `P`, whose
/// rank of `[A, PB]` equals `min{2r, r + H − C}`.
pub fn generic_rank_check(n: usize, m_a: usize, m_b: usize, r: usize, trials: usize, seed: u64) -> Result<GenericRankReport> {
    let root = ((n as f64) / 2.0).sqrt().floor() as usize;
    if r > root {
        return Err(invalid(format!("r = {r} exceeds floor(sqrt(n/2)) = {root}")));
    }
    if r > m_a {
        return Err(invalid(format!("r = {r} exceeds m_A = {m_a}")));
    }
    if r > m_b {
        return Err(invalid(format!("r = {r} exceeds m_B = {m_b}")));
    }
    if trials == 0 {
        return Err(invalid("trials must be positive"));
    }
    let out: Vec<(usize, usize)> = (0..trials)
        .into_par_iter()
        .map(|k| generic_rank_trial(derive_seed(seed, k as u64), n, m_a, m_b, r, Sparsity::Dense))
        .collect::<Result<_>>()?;
    let mismatches: Vec<(usize, usize)> = out.into_iter().filter(|(p, o)| p != o).collect();
    let matches = trials - mismatches.len();
    Ok(GenericRankReport {
        trials,
        matches,
        fraction: matches as f64 / trials as f64,
        mismatches,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RatioRow {
    pub obs_frac: f64,
    pub h: usize,
    pub ratio: f64,
}

/// `‖[A, PB]‖_*/‖M‖_*` for a permutation moving exactly `H` rows, with
/// unobserved entries filled by Soft-Impute before taking the norm.
pub fn nuclear_ratio_curve(
    m: &DenseMatrix,
    split: &BlockPartition,
    obs_fracs: &[f64],
    h_targets: &[usize],
    lam: f64,
    seed: u64,
) -> Result<Vec<RatioRow>> {
    if split.d() != 1 {
        return Err(invalid("the ratio curve needs exactly one permuted block"));
    }
    split.check_width(m.ncols())?;
    let n = m.nrows();
    let base = nuclear_norm(m)?;
    let mut jobs = Vec::new();
    for (fi, &f) in obs_fracs.iter().enumerate() {
        for (hi, &h) in h_targets.iter().enumerate() {
            jobs.push((fi, f, hi, h));
        }
    }
    jobs.into_par_iter()
        .map(|(fi, f, hi, h)| {
            let mut rng = seeded(derive_seed(seed, (fi * h_targets.len() + hi) as u64));
            let p = if h == 0 {
                Permutation::identity(n)
            } else {
                Permutation::sample(n, Sparsity::Moved(h), &mut rng)?
            };
            let a = m.columns(0, split.anchor).into_owned();
            let pb = p.apply_rows(&m.columns(split.anchor, split.widths[0]).into_owned())?;
            let full = hstack(&[&a, &pb])?;
            let value = if f >= 1.0 {
                nuclear_norm(&full)?
            } else {
                let mask = uniform_mask(n, m.ncols(), f, &mut rng);
                let obs = MaskedMatrix::new(full, mask)?;
                let fill = soft_impute(&obs, lam, 1e-5, 1000, None)?;
                nuclear_norm(&impute(&obs, &fill.matrix))?
            };
            Ok(RatioRow {
                obs_frac: f,
                h,
                ratio: value / base,
            })
        })
        .collect()
}

/// Exact `argmin_π ‖[A, P_π B]‖_*` by enumeration in lexicographic order;
/// the first minimizer wins ties.
pub fn brute_force_min_nuclear(a: &DenseMatrix, b: &DenseMatrix) -> Result<(Permutation, f64)> {
    let n = a.nrows();
    if b.nrows() != n {
        return Err(Error::SizeMismatch(n, b.nrows()));
    }
    if n > BRUTE_FORCE_MAX_N {
        return Err(invalid(format!("brute force refuses n = {n} > {BRUTE_FORCE_MAX_N}")));
    }
    let mut x = hstack(&[a, b])?;
    let m_a = a.ncols();
    let mut best = (Permutation::identity(n), f64::INFINITY);
    let mut cur = Some(Permutation::identity(n));
    while let Some(p) = cur {
        for i in 0..n {
            for k in 0..b.ncols() {
                x[(p.get(i), m_a + k)] = b[(i, k)];
            }
        }
        let v = nuclear_norm(&x)?;
        if v < best.1 {
            best = (p.clone(), v);
        }
        cur = p.next_lex();
    }
    Ok(best)
}

fn orthonormal_columns(rng: &mut Rng64, n: usize, k: usize) -> DenseMatrix {
    gaussian_matrix(rng, n, k).qr().q().columns(0, k).into_owned()
}

/// `A = U Σ V_Aᵀ` and `B = U (Σ + shift·I) V_Bᵀ` with Haar-like orthonormal
/// factors and well separated singular values `Σ_ii ∈ [10 − 2i, 11 − 2i)`.
/// With `shift = 0` the pair has `eps1 = eps2 = 0`.
pub fn planted_pair(seed: u64, n: usize, m_a: usize, m_b: usize, r: usize, shift: f64) -> Result<(DenseMatrix, DenseMatrix)> {
    if r == 0 || r > n.min(m_a).min(m_b) {
        return Err(invalid(format!("rank {r} does not fit {n}x{m_a} and {n}x{m_b}")));
    }
    let mut rng = seeded(seed);
    let u = orthonormal_columns(&mut rng, n, r);
    let va = orthonormal_columns(&mut rng, m_a, r);
    let vb = orthonormal_columns(&mut rng, m_b, r);
    let top = 2.0 * r as f64;
    let s: Vec<f64> = (0..r).map(|i| top - 2.0 * i as f64 + rng.random::<f64>()).collect();
    let sa = DenseMatrix::from_diagonal(&DVector::from_vec(s.clone()));
    let sb = DenseMatrix::from_diagonal(&DVector::from_iterator(r, s.iter().map(|x| x + shift)));
    Ok((&u * sa * va.transpose(), &u * sb * vb.transpose()))
}

/// Spearman rank correlation with average ranks for ties.
pub fn spearman(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::SizeMismatch(x.len(), y.len()));
    }
    if x.len() < 2 {
        return Err(invalid("rank correlation needs at least two points"));
    }
    let rx = ranks(x);
    let ry = ranks(y);
    let mean = (x.len() as f64 + 1.0) / 2.0;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in rx.iter().zip(&ry) {
        sxy += (a - mean) * (b - mean);
        sxx += (a - mean).powi(2);
        syy += (b - mean).powi(2);
    }
    if sxx == 0.0 || syy == 0.0 {
        return Ok(0.0);
    }
    Ok(sxy / (sxx * syy).sqrt())
}

fn ranks(v: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&i, &j| v[i].total_cmp(&v[j]));
    let mut out = vec![0.0; v.len()];
    let mut s = 0;
    while s < idx.len() {
        let mut e = s;
        while e + 1 < idx.len() && v[idx[e + 1]] == v[idx[s]] {
            e += 1;
        }
        let avg = (s + e) as f64 / 2.0 + 1.0;
        for &k in &idx[s..=e] {
            out[k] = avg;
        }
        s = e + 1;
    }
    out
}

/// `(1 − H/2n)^{-1/2}`.
pub fn ratio_law(h: usize, n: usize) -> f64 {
    (1.0 - h as f64 / (2.0 * n as f64)).powf(-0.5)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn planted(seed: u64, n: usize, m: usize, r: usize, shift: f64) -> (DenseMatrix, DenseMatrix) {
        planted_pair(seed, n, m, m, r, shift).unwrap()
    }

    #[test]
    fn identical_blocks_have_zero_eps() {
        let a = gaussian_matrix(&mut seeded(1), 12, 5);
        let c = assumption_constants(&a, &a, 0.0).unwrap();
        assert!(c.eps1 < 1e-12 && c.eps2 < 1e-12);
        assert_eq!((c.r_a, c.r_b, c.t, c.r), (5, 5, 5, 5));
        assert!(c.eps3 > 0.0);
        assert!((c.d - 2.0 * nuclear_norm(&a).unwrap()).abs() < 1e-9);
        assert_eq!(c.l, 12);
    }

    #[test]
    fn duplicated_entries_collapse_eps3() {
        let mut a = gaussian_matrix(&mut seeded(2), 6, 1);
        a[(1, 0)] = a[(0, 0)];
        let b = gaussian_matrix(&mut seeded(3), 6, 1);
        assert!(assumption_constants(&a, &b, 0.0).unwrap().eps3 < 1e-12);
    }

    #[test]
    fn planted_shift_gives_eps1() {
        let (a, b) = planted(4, 20, 8, 3, 0.1);
        let c = assumption_constants(&a, &b, 0.0).unwrap();
        assert!((c.eps1 - 0.1).abs() < 1e-9, "{}", c.eps1);
        assert!(c.eps2 < 1e-9);
    }

    #[test]
    fn clean_limit_bound_is_zero() {
        let (a, b) = planted(5, 7, 4, 2, 0.0);
        let inp = assumption_constants(&a, &b, 0.0).unwrap();
        let e = theorem_error_bound(&inp);
        assert!(e.bound < 1e-6, "{}", e.bound);
        assert_eq!(e.prob, 1.0);
        assert!(e.assumptions_ok);
    }

    #[test]
    fn bound_diverges_as_eps3_vanishes() {
        let (a, b) = planted(6, 7, 4, 2, 0.05);
        let mut inp = assumption_constants(&a, &b, 0.0).unwrap();
        let mut last = 0.0;
        for e3 in [1e-1, 1e-2, 1e-3, 1e-4] {
            inp.eps3 = e3;
            let v = theorem_error_bound(&inp).bound;
            assert!(v > last);
            last = v;
        }
        inp.eps3 = 0.0;
        let e = theorem_error_bound(&inp);
        assert!(e.bound.is_infinite() && e.note.is_some() && !e.assumptions_ok);
    }

    #[test]
    fn bound_monotone_in_parameters() {
        let (a, b) = planted(7, 10, 5, 2, 0.02);
        let base = assumption_constants(&a, &b, 0.01).unwrap();
        let f = |g: &dyn Fn(&mut TheoremInputs, f64), v: f64| {
            let mut i = base.clone();
            g(&mut i, v);
            theorem_error_bound(&i).bound
        };
        let grid = [0.0, 0.01, 0.02, 0.05, 0.1];
        let setters: [&dyn Fn(&mut TheoremInputs, f64); 3] = [&|i, v| i.eps1 = v, &|i, v| i.eps2 = v, &|i, v| i.sigma_noise = v];
        for g in setters {
            for w in grid.windows(2) {
                assert!(f(g, w[1]) >= f(g, w[0]) - 1e-12);
            }
        }
        for w in [0.5, 0.1, 0.05, 0.01].windows(2) {
            assert!(f(&|i, v| i.eps3 = v, w[1]) >= f(&|i, v| i.eps3 = v, w[0]));
        }
    }

    #[test]
    fn probability_formula() {
        let (a, b) = planted(8, 7, 4, 2, 0.0);
        let mut inp = assumption_constants(&a, &b, 0.0).unwrap();
        inp.sigma_noise = 0.5;
        let e = theorem_error_bound(&inp);
        let want = 1.0 - 2.0 * (-inp.d / (8.0 * inp.l as f64 * 0.5)).exp();
        assert!((e.prob - want).abs() < 1e-15);
    }

    #[test]
    fn sandwich_edge_cases() {
        let a = gaussian_matrix(&mut seeded(9), 10, 4);
        let z = DenseMatrix::zeros(10, 3);
        let p = Permutation::random(10, &mut seeded(10));
        let rep = nuclear_sandwich_check(&a, &z, &p).unwrap();
        assert!(rep.upper_slack.abs() < 1e-9);
        assert!(rep.holds());
        let q = orthonormal_columns(&mut seeded(11), 10, 3);
        let rep = nuclear_sandwich_check(&q, &q, &Permutation::identity(10)).unwrap();
        assert!(rep.lower_slack.abs() < 1e-9);
        assert!((rep.value - 2f64.sqrt() * 3.0).abs() < 1e-9);
    }

    #[test]
    fn sandwich_random_instances() {
        for s in 0..50 {
            let mut rng = seeded(100 + s);
            let a = gaussian_matrix(&mut rng, 20, 8);
            let b = gaussian_matrix(&mut rng, 20, 8);
            let p = Permutation::random(20, &mut rng);
            let rep = nuclear_sandwich_check(&a, &b, &p).unwrap();
            assert!(rep.lower_slack > 0.0 && rep.upper_slack > 0.0);
            assert!(rep.relative_change.abs() <= rep.relative_bound + 1e-12);
        }
    }

    #[test]
    fn generic_rank_cases() {
        assert_eq!(predicted_generic_rank(3, &Permutation::identity(8)), 3);
        let full = Permutation::from_vec((1..32).chain(0..1).collect()).unwrap();
        assert_eq!(predicted_generic_rank(3, &full), 6);
        let (p, o) = generic_rank_trial(1, 32, 8, 8, 3, Sparsity::Moved(2)).unwrap();
        assert_eq!((p, o), (4, 4));
        let rep = generic_rank_check(32, 8, 8, 3, 20, 7).unwrap();
        assert_eq!(rep.fraction, 1.0);
        assert!(generic_rank_check(32, 8, 8, 5, 1, 0).is_err());
        assert!(generic_rank_check(32, 2, 8, 3, 1, 0).is_err());
    }

    #[test]
    fn brute_force_recovers_planted() {
        let (a, b) = planted(12, 6, 3, 2, 0.0);
        let sigma = Permutation::random(6, &mut seeded(13));
        let bo = sigma.apply_rows(&b).unwrap();
        let (p, v) = brute_force_min_nuclear(&a, &bo).unwrap();
        assert_eq!(p, sigma.inverse());
        assert!((v - nuclear_norm(&hstack(&[&a, &b]).unwrap()).unwrap()).abs() < 1e-9);
        let (p, _) = brute_force_min_nuclear(&a, &a).unwrap();
        assert!(p.is_identity());
        assert!(brute_force_min_nuclear(&DenseMatrix::zeros(10, 1), &DenseMatrix::zeros(10, 1)).is_err());
    }

    #[test]
    fn brute_force_beats_samples() {
        let mut rng = seeded(14);
        let a = gaussian_matrix(&mut rng, 6, 2);
        let b = gaussian_matrix(&mut rng, 6, 2);
        let (_, v) = brute_force_min_nuclear(&a, &b).unwrap();
        for _ in 0..1000 {
            let p = Permutation::random(6, &mut rng);
            let w = nuclear_norm(&hstack(&[&a, &p.apply_rows(&b).unwrap()]).unwrap()).unwrap();
            assert!(v <= w + 1e-12);
        }
    }

    #[test]
    fn spearman_basics() {
        assert!((spearman(&[1.0, 2.0, 3.0], &[10.0, 20.0, 30.0]).unwrap() - 1.0).abs() < 1e-15);
        assert!((spearman(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]).unwrap() + 1.0).abs() < 1e-15);
        assert_eq!(ranks(&[2.0, 1.0, 2.0]), vec![2.5, 1.0, 2.5]);
        assert!(spearman(&[1.0], &[1.0]).is_err());
    }

    #[test]
    fn ratio_curve_identity_is_one() {
        let (a, b) = planted(15, 30, 10, 3, 0.0);
        let m = hstack(&[&a, &b]).unwrap();
        let split = BlockPartition::new(10, vec![10]).unwrap();
        let rows = nuclear_ratio_curve(&m, &split, &[1.0], &[0, 10], 0.1, 1).unwrap();
        assert!((rows[0].ratio - 1.0).abs() < 1e-12);
        assert!(rows[1].ratio > 1.0);
    }
}
