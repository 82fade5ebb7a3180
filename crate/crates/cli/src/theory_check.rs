//! The `theory-check` command: genericity of the rank formula, the
//! nuclear-norm sandwich, the ratio law and brute-force recovery.

use rayon::prelude::*;
use serde::Serialize;
use unshuffle_core::error::Result;
use unshuffle_core::lamat::hstack;
use unshuffle_core::perm::{d_hamming, Permutation};
use unshuffle_core::rng::{derive_seed, gaussian_matrix, seeded};
use unshuffle_core::solvers::BlockPartition;
use unshuffle_core::theory::{
    assumption_constants, brute_force_min_nuclear, generic_rank_check, nuclear_ratio_curve, nuclear_sandwich_check,
    planted_pair, ratio_law, spearman, theorem_error_bound, GenericRankReport, RatioRow,
};

use crate::plot;
use crate::spec::TheorySpec;

const BRUTE_M: usize = 4;
const BRUTE_R: usize = 2;

#[derive(Clone, Debug, Serialize)]
pub struct SandwichSummary {
    pub instances: usize,
    pub all_hold: bool,
    pub min_lower_slack: f64,
    pub min_upper_slack: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct RatioFit {
    pub obs_frac: f64,
    pub spearman: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct BruteRow {
    pub eps1: f64,
    pub instances: usize,
    pub exact: usize,
    pub max_d_hamming: usize,
    /// Instances whose observed distance exceeded the error bound.
    pub bound_violations: usize,
    pub max_bound: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct TheoryReport {
    pub generic_rank: GenericRankReport,
    pub sandwich: SandwichSummary,
    pub ratio_curve: Vec<RatioRow>,
    pub ratio_fit: Vec<RatioFit>,
    pub brute_force: Vec<BruteRow>,
}

pub fn sandwich(n: usize, instances: usize, seed: u64) -> Result<SandwichSummary> {
    let reps: Vec<_> = (0..instances)
        .into_par_iter()
        .map(|k| {
            let mut rng = seeded(derive_seed(seed, k as u64));
            let ma = 1 + (k % 7);
            let mb = 1 + (k / 7) % 7;
            let a = gaussian_matrix(&mut rng, n, ma);
            let b = gaussian_matrix(&mut rng, n, mb);
            let p = Permutation::random(n, &mut rng);
            nuclear_sandwich_check(&a, &b, &p)
        })
        .collect::<Result<_>>()?;
    Ok(SandwichSummary {
        instances,
        all_hold: reps.iter().all(|r| r.holds()),
        min_lower_slack: reps.iter().map(|r| r.lower_slack).fold(f64::INFINITY, f64::min),
        min_upper_slack: reps.iter().map(|r| r.upper_slack).fold(f64::INFINITY, f64::min),
    })
}

/// Ratio curve on a planted matrix with one permuted block.
pub fn ratio_curve(t: &TheorySpec, seed: u64) -> Result<(Vec<RatioRow>, Vec<RatioFit>)> {
    let (a, b) = planted_pair(seed, t.ratio_n, t.ratio_m_a, t.ratio_m_b, t.ratio_r, 0.0)?;
    let m = hstack(&[&a, &b])?;
    let split = BlockPartition::new(t.ratio_m_a, vec![t.ratio_m_b])?;
    let rows = nuclear_ratio_curve(&m, &split, &t.ratio_obs_fracs, &t.ratio_h, t.ratio_lambda, derive_seed(seed, 1))?;
    let fit = t
        .ratio_obs_fracs
        .iter()
        .map(|&f| {
            let mine: Vec<&RatioRow> = rows.iter().filter(|r| r.obs_frac == f).collect();
            let x: Vec<f64> = mine.iter().map(|r| r.ratio).collect();
            let y: Vec<f64> = mine.iter().map(|r| ratio_law(r.h, t.ratio_n)).collect();
            Ok(RatioFit {
                obs_frac: f,
                spearman: spearman(&x, &y)?,
            })
        })
        .collect::<Result<_>>()?;
    Ok((rows, fit))
}

/// Planted instances shuffled at random, recovered by exhaustive search.
pub fn brute_force(n: usize, instances: usize, eps1: f64, seed: u64) -> Result<BruteRow> {
    let out: Vec<(usize, f64)> = (0..instances)
        .into_par_iter()
        .map(|k| {
            let s = derive_seed(seed, k as u64);
            let (a, b) = planted_pair(s, n, BRUTE_M, BRUTE_M, BRUTE_R, eps1)?;
            let sigma = Permutation::random(n, &mut seeded(derive_seed(s, 1)));
            let (p, _) = brute_force_min_nuclear(&a, &sigma.apply_rows(&b)?)?;
            let dh = d_hamming(&p.inverse(), &sigma)?;
            let bound = theorem_error_bound(&assumption_constants(&a, &b, 0.0)?).bound;
            Ok((dh, bound))
        })
        .collect::<Result<_>>()?;
    Ok(BruteRow {
        eps1,
        instances,
        exact: out.iter().filter(|o| o.0 == 0).count(),
        max_d_hamming: out.iter().map(|o| o.0).max().unwrap_or(0),
        bound_violations: out.iter().filter(|o| o.0 as f64 > o.1 + 1e-9).count(),
        max_bound: out.iter().map(|o| o.1).fold(0.0, f64::max),
    })
}

pub fn run(t: &TheorySpec, seed: u64) -> Result<TheoryReport> {
    let generic_rank = generic_rank_check(t.rank_n, t.rank_m_a, t.rank_m_b, t.rank_r, t.rank_trials, derive_seed(seed, 10))?;
    let sandwich = sandwich(t.sandwich_n, t.sandwich_instances, derive_seed(seed, 11))?;
    let (ratio_curve, ratio_fit) = ratio_curve(t, derive_seed(seed, 12))?;
    let brute_force = t
        .brute_eps1
        .iter()
        .enumerate()
        .map(|(k, &e)| brute_force(t.brute_n, t.brute_instances, e, derive_seed(seed, 13 + k as u64)))
        .collect::<Result<_>>()?;
    Ok(TheoryReport {
        generic_rank,
        sandwich,
        ratio_curve,
        ratio_fit,
        brute_force,
    })
}

pub fn ratio_plot(report: &TheoryReport, n: usize) -> String {
    let mut series: Vec<plot::Series> = Vec::new();
    for f in &report.ratio_fit {
        series.push(plot::Series {
            name: format!("observed {}%", (f.obs_frac * 100.0).round()),
            points: report
                .ratio_curve
                .iter()
                .filter(|r| r.obs_frac == f.obs_frac)
                .map(|r| (r.h as f64, r.ratio))
                .collect(),
        });
    }
    let mut hs: Vec<usize> = report.ratio_curve.iter().map(|r| r.h).collect();
    hs.sort_unstable();
    hs.dedup();
    series.push(plot::Series {
        name: "(1 - H/2n)^-1/2".into(),
        points: hs.iter().map(|&h| (h as f64, ratio_law(h, n))).collect(),
    });
    plot::Chart {
        title: "nuclear norm ratio vs moved rows",
        x_label: "H",
        y_label: "ratio",
        style: plot::Style::Line,
        log_y: false,
    }
    .render(&series)
}
