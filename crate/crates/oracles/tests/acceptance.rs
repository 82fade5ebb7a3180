//! Acceptance criteria, one line of output per criterion. Exits nonzero when
//! any criterion fails.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::time::Instant;

use unshuffle_cli::theory_check;
use unshuffle_cli::{read_results, run_experiment, Command, CsvRow, ExperimentSpec, TheorySpec};
use unshuffle_core::completion::soft_impute_step;
use unshuffle_core::data::{gen_synthetic, ShuffleKind, SyntheticParams};
use unshuffle_core::eot::{grad_entropic, masked_pair_cost, plan_from_duals, sinkhorn_log, CostMatrix, DualPotentials};
use unshuffle_core::lamat::{DenseMatrix, Mask, MaskedMatrix};
use unshuffle_core::perm::{d_hamming, Permutation};
use unshuffle_core::rng::{derive_seed, gaussian_matrix, seeded};
use unshuffle_core::solvers::{lap_solve, solve_m3o, BlockPartition, InitStrategy, LambdaSchedule, SolverConfig};
use unshuffle_core::theory::{
    assumption_constants, brute_force_min_nuclear, generic_rank_check, nuclear_sandwich_check, planted_pair,
    theorem_error_bound,
};
use unshuffle_oracles::{
    central_gradient, dual_value, exhaustive_assignment, pair_cost, rank_correlation, scaling_sinkhorn, Rows,
};

enum Verdict {
    Pass,
    Fail,
    Skip,
}

struct Outcome {
    verdict: Verdict,
    detail: String,
}

fn judge(ok: bool, detail: String) -> Outcome {
    Outcome {
        verdict: if ok { Verdict::Pass } else { Verdict::Fail },
        detail,
    }
}

fn rows(m: &DenseMatrix) -> Rows {
    (0..m.nrows()).map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect()).collect()
}

fn uniform_cost(seed: u64, n: usize) -> CostMatrix {
    let g = gaussian_matrix(&mut seeded(seed), n, n);
    // squash normals into (0, 1)
    CostMatrix::from_fn(n, |i, j| 0.5 * (1.0 + (g[(i, j)] / 2f64.sqrt()).tanh())).unwrap()
}

fn cost_rows(c: &CostMatrix) -> Rows {
    (0..c.n()).map(|i| c.row(i).to_vec()).collect()
}

fn ac1() -> Outcome {
    let t0 = Instant::now();
    let rep = generic_rank_check(32, 8, 8, 3, 200, 2024).unwrap();
    let secs = t0.elapsed().as_secs_f64();
    judge(
        rep.fraction == 1.0 && secs < 10.0,
        format!("equality fraction {} over {} trials in {secs:.2} s", rep.fraction, rep.trials),
    )
}

fn ac2() -> Outcome {
    let mut worst: f64 = f64::INFINITY;
    let mut ok = 0;
    for k in 0..500u64 {
        let mut rng = seeded(derive_seed(77, k));
        let ma = 1 + (k as usize % 9);
        let mb = 1 + (k as usize / 9) % 9;
        let a = gaussian_matrix(&mut rng, 20, ma);
        let b = gaussian_matrix(&mut rng, 20, mb);
        let p = Permutation::random(20, &mut rng);
        let r = nuclear_sandwich_check(&a, &b, &p).unwrap();
        worst = worst.min(r.lower_slack.min(r.upper_slack));
        if r.lower_slack >= 0.0 && r.upper_slack >= 0.0 {
            ok += 1;
        }
    }
    judge(ok == 500, format!("{ok}/500 instances with nonnegative slack, smallest slack {worst:.3e}"))
}

fn ac3() -> Outcome {
    let mut worst_drop: f64 = 0.0;
    let mut worst_resid: f64 = 0.0;
    let mut unconverged = 0;
    for eps in [1.0, 0.1] {
        for k in 0..100u64 {
            let c = uniform_cost(derive_seed(300, k), 20);
            let cr = cost_rows(&c);
            let mut duals = DualPotentials {
                alpha: vec![1.0; 20],
                beta: vec![1.0; 20],
            };
            let mut prev = dual_value(&cr, &duals.alpha, &duals.beta, eps);
            for _ in 0..200 {
                duals = sinkhorn_log(&c, eps, 0.0, 1, Some(&duals)).unwrap().duals;
                let cur = dual_value(&cr, &duals.alpha, &duals.beta, eps);
                worst_drop = worst_drop.max(prev - cur);
                prev = cur;
            }
            let out = sinkhorn_log(&c, eps, 0.01, 10_000, None).unwrap();
            unconverged += usize::from(!out.converged);
            let p = rows(&out.plan.to_dense());
            let rs: f64 = p.iter().map(|r| (r.iter().sum::<f64>() - 1.0).powi(2)).sum::<f64>();
            let cs: f64 = (0..20).map(|j| (p.iter().map(|r| r[j]).sum::<f64>() - 1.0).powi(2)).sum::<f64>();
            worst_resid = worst_resid.max((rs / 20.0).sqrt()).max((cs / 20.0).sqrt());
        }
    }
    let mut worst_gap: f64 = 0.0;
    for k in 0..100u64 {
        let c = uniform_cost(derive_seed(301, k), 20);
        let fast = rows(&sinkhorn_log(&c, 0.5, 1e-14, 100_000, None).unwrap().plan.to_dense());
        let slow = scaling_sinkhorn(&cost_rows(&c), 0.5, 2000);
        for i in 0..20 {
            for j in 0..20 {
                worst_gap = worst_gap.max((fast[i][j] - slow[i][j]).abs());
            }
        }
    }
    judge(
        worst_drop <= 1e-9 && worst_resid <= 0.01 && unconverged == 0 && worst_gap <= 1e-8,
        format!(
            "largest dual drop {worst_drop:.2e}, largest final residual {worst_resid:.2e} ({unconverged} unconverged), \
             log vs scaling gap {worst_gap:.2e}"
        ),
    )
}

fn ac4() -> Outcome {
    let (n, m, eps) = (10, 6, 0.5);
    let mut worst: f64 = 0.0;
    for k in 0..50u64 {
        let mut rng = seeded(derive_seed(400, k));
        let mhat = gaussian_matrix(&mut rng, n, m);
        let data = gaussian_matrix(&mut rng, n, m);
        let mask = unshuffle_core::data::uniform_mask(n, m, 0.4, &mut rng);
        let b = MaskedMatrix::new(data.clone(), mask.clone()).unwrap();
        let c = masked_pair_cost(&mhat, &b).unwrap();
        let duals = sinkhorn_log(&c, eps, 1e-3, 10_000, None).unwrap().duals;
        let plan = plan_from_duals(&c, &duals, eps).unwrap();
        let g = grad_entropic(&mhat, &b, &plan).unwrap();

        let observed: Vec<Vec<bool>> = (0..n).map(|i| (0..m).map(|j| mask.get(i, j)).collect()).collect();
        let data_rows = rows(&data);
        let f = |x: &[f64]| {
            let mm: Rows = x.chunks(m).map(|r| r.to_vec()).collect();
            dual_value(&pair_cost(&mm, &data_rows, &observed), &duals.alpha, &duals.beta, eps)
        };
        let flat: Vec<f64> = rows(&mhat).concat();
        let fd = central_gradient(f, &flat, 1e-5);
        let gv: Vec<f64> = rows(&g).concat();
        let num: f64 = gv.iter().zip(&fd).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        let den: f64 = fd.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-12);
        worst = worst.max(num / den);
    }
    judge(worst <= 1e-4, format!("largest relative error {worst:.2e} over 50 instances"))
}

fn ac5() -> Outcome {
    let mut mismatches = 0;
    for k in 0..100u64 {
        let c = uniform_cost(derive_seed(500, k), 7);
        let (p, v) = lap_solve(&c);
        let (_, best) = exhaustive_assignment(&cost_rows(&c));
        let direct: f64 = (0..7).map(|i| c.get(i, p.get(i))).sum();
        if (v - best).abs() > 1e-12 || (direct - best).abs() > 1e-12 {
            mismatches += 1;
        }
    }
    judge(mismatches == 0, format!("{mismatches}/100 instances differ from the 5040-permutation minimum"))
}

fn ac6() -> Outcome {
    let mut worst: f64 = 0.0;
    for seed in 0..10u64 {
        let p = SyntheticParams {
            n: 40,
            r: 3,
            eta: 0.1,
            partition: BlockPartition::new(15, vec![10, 8]).unwrap(),
            obs_frac: 0.6,
            shuffle: ShuffleKind::Uniform,
        };
        let sc = gen_synthetic(&p, seed).unwrap();
        let truth = sc.truth.as_ref().unwrap();
        let (n, mtot) = sc.observed.shape();
        let anchor = sc.partition.anchor;
        let mask = Mask::from_fn(n, mtot, |i, j| j < anchor || sc.observed.mask.get(i, j));
        let obs = MaskedMatrix::new(sc.observed.data.clone(), mask).unwrap();
        let init = gaussian_matrix(&mut seeded(900 + seed), n, mtot);
        let cfg = SolverConfig {
            lambda: LambdaSchedule::Fixed(0.8),
            rho_fixed: Some(0.5),
            outer_iters: 1,
            init: InitStrategy::Provided,
            init_matrix: Some(init.clone()),
            frozen_plans: Some(truth.perms.clone()),
            ..Default::default()
        };
        let got = solve_m3o(&obs, &sc.partition, &cfg, None).unwrap().m_hat;

        // undo the shuffle by hand: slot i of block l holds observed row perms[l](i)
        let block_of = |j: usize| (0..sc.partition.d()).find(|&l| {
            let o = sc.partition.offset(l);
            j >= o && j < o + sc.partition.widths[l]
        });
        let row = |i: usize, j: usize| block_of(j).map_or(i, |l| truth.perms[l].get(i));
        let data = DenseMatrix::from_fn(n, mtot, |i, j| obs.data[(row(i, j), j)]);
        let amask = Mask::from_fn(n, mtot, |i, j| obs.mask.get(row(i, j), j));
        let aligned = MaskedMatrix::new(data, amask).unwrap();
        let want = soft_impute_step(&aligned, &init, 0.8).unwrap().matrix;
        worst = worst.max((got - want).abs().max());
    }
    judge(worst <= 1e-9, format!("largest entrywise difference {worst:.2e} over 10 instances"))
}

fn run_spec(spec: &ExperimentSpec, dir: &Path) -> (Vec<CsvRow>, f64) {
    let t0 = Instant::now();
    run_experiment(spec, dir).unwrap();
    (read_results(&dir.join("results.csv")).unwrap(), t0.elapsed().as_secs_f64())
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let k = v.len();
    if k % 2 == 1 {
        v[k / 2]
    } else {
        (v[k / 2 - 1] + v[k / 2]) / 2.0
    }
}

fn per_run(rows: &[CsvRow], alg: &str, f: impl Fn(&CsvRow) -> Option<f64>) -> Vec<f64> {
    rows.iter().filter(|r| r.algorithm == alg && r.block == Some(1)).filter_map(f).collect()
}

fn ac7(tmp: &Path) -> Outcome {
    let spec = ExperimentSpec::from_json(
        r#"{"command": "synth",
            "synthetic": {"n": 100, "r": 5, "eta": 0.1, "partition": {"anchor": 60, "widths": [40]}, "obs_frac": 0.8},
            "algorithms": ["m3o", "baseline", "mus"], "repeat": 10, "data_seed": 0}"#,
    )
    .unwrap();
    let (rows, secs) = run_spec(&spec, &tmp.join("ac7"));
    let dh = per_run(&rows, "m3o", |r| r.d_hamming.map(|d| d as f64));
    let med = |a: &str| median(per_run(&rows, a, |r| r.objective));
    let (m, b, u) = (med("m3o"), med("baseline"), med("mus"));
    let best = dh.iter().copied().fold(f64::INFINITY, f64::min);
    judge(
        best == 0.0 && m < b && m < u && secs <= 300.0,
        format!("m3o best d_H {best} over {} inits; median objective m3o {m:.3} baseline {b:.3} mus {u:.3}; {secs:.0} s", dh.len()),
    )
}

fn ac8(tmp: &Path) -> Outcome {
    let spec = ExperimentSpec::from_json(
        r#"{"command": "dcorr-table",
            "synthetic": {"n": 100, "r": 5, "eta": 0.1, "partition": {"anchor": 40, "widths": [30, 30]}, "obs_frac": 0.4},
            "algorithms": ["m3o"], "repeat": 10, "data_seed": 0}"#,
    )
    .unwrap();
    let (rows, secs) = run_spec(&spec, &tmp.join("ac8"));
    let errs = per_run(&rows, "m3o", |r| r.norm_perm_err);
    let min = errs.iter().copied().fold(f64::INFINITY, f64::min);
    let mean = errs.iter().sum::<f64>() / errs.len() as f64;
    judge(
        min <= 5.0 && (0.0..=75.0).contains(&mean) && secs <= 600.0,
        format!("normalized permutation error min {min} mean {mean:.2} over {} inits; {secs:.0} s", errs.len()),
    )
}

fn ac9() -> Outcome {
    let mut clean_bad = 0;
    let mut max_bound: f64 = 0.0;
    let mut eps_bad = 0;
    let mut assumptions_bad = 0;
    for k in 0..50u64 {
        for (shift, clean) in [(0.0, true), (0.05, false)] {
            let s = derive_seed(if clean { 900 } else { 901 }, k);
            let (a, b) = planted_pair(s, 7, 4, 4, 2, shift).unwrap();
            let inp = assumption_constants(&a, &b, 0.0).unwrap();
            let bound = theorem_error_bound(&inp);
            let sigma = Permutation::random(7, &mut seeded(derive_seed(s, 1)));
            let (p, _) = brute_force_min_nuclear(&a, &sigma.apply_rows(&b).unwrap()).unwrap();
            let dh = d_hamming(&p.inverse(), &sigma).unwrap();
            if clean {
                if inp.eps1 > 1e-9 || inp.eps2 > 1e-6 || !bound.assumptions_ok {
                    assumptions_bad += 1;
                }
                max_bound = max_bound.max(bound.bound);
                if dh != 0 || bound.bound >= 1.0 {
                    clean_bad += 1;
                }
            } else if dh as f64 > bound.bound {
                eps_bad += 1;
            }
        }
    }
    judge(
        clean_bad == 0 && eps_bad == 0 && assumptions_bad == 0,
        format!(
            "clean: {clean_bad}/50 with d_H > 0 or bound >= 1 (largest bound {max_bound:.1e}), {assumptions_bad} off-assumption; \
             eps1 = 0.05: {eps_bad}/50 above the bound"
        ),
    )
}

fn ac10() -> Outcome {
    let t = TheorySpec::default();
    let (curve, _) = theory_check::ratio_curve(&t, 5).unwrap();
    let rho = |f: f64| {
        let mine: Vec<_> = curve.iter().filter(|r| r.obs_frac == f).collect();
        let x: Vec<f64> = mine.iter().map(|r| r.ratio).collect();
        let y: Vec<f64> = mine.iter().map(|r| (1.0 - r.h as f64 / (2.0 * t.ratio_n as f64)).powf(-0.5)).collect();
        rank_correlation(&x, &y)
    };
    let (full, part) = (rho(1.0), rho(0.4));
    judge(full >= 0.95 && part >= 0.8, format!("Spearman {full:.3} at 100% observed, {part:.3} at 40% observed"))
}

fn movielens_dir() -> Option<PathBuf> {
    let candidates = [
        std::env::var_os("UNSHUFFLE_ML100K").map(PathBuf::from),
        Some(Path::new(env!("CARGO_MANIFEST_DIR")).join("../../ml-100k")),
    ];
    candidates.into_iter().flatten().find(|d| d.join("u.data").is_file() && d.join("u.item").is_file())
}

fn ac11(tmp: &Path) -> Outcome {
    let Some(dir) = movielens_dir() else {
        return Outcome {
            verdict: Verdict::Skip,
            detail: "MovieLens 100K not found (set UNSHUFFLE_ML100K)".into(),
        };
    };
    let mut spec = ExperimentSpec::new(Command::Movielens);
    spec.movielens = Some(unshuffle_cli::MovieLensSpec {
        path: dir,
        ..Default::default()
    });
    spec.repeat = 10;
    let (rows, secs) = run_spec(&spec, &tmp.join("ac11"));
    let mean = |a: &str| {
        let v = per_run(&rows, a, |r| r.rmse_test);
        v.iter().sum::<f64>() / v.len().max(1) as f64
    };
    let (sir, sic, base, mus, m3o, oracle) = (mean("sir"), mean("sic"), mean("baseline"), mean("mus"), mean("m3o"), mean("oracle"));
    let ok = sir > sic && sic >= base && sic >= mus && base > m3o && mus > m3o && m3o >= oracle - 0.03;
    judge(
        ok && (0.87..=0.95).contains(&m3o) && secs <= 1800.0,
        format!(
            "test RMSE sir {sir:.4} sic {sic:.4} baseline {base:.4} mus {mus:.4} m3o {m3o:.4} oracle {oracle:.4}; {secs:.0} s"
        ),
    )
}

fn strip_wall_time(path: &Path) -> Vec<String> {
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .map(|l| l.rsplit_once(',').unwrap().0.to_string())
        .collect()
}

fn ac12(tmp: &Path) -> Outcome {
    let synth = ExperimentSpec::from_json(
        r#"{"command": "ablation",
            "synthetic": {"n": 40, "r": 3, "eta": 0.1, "partition": {"anchor": 15, "widths": [10, 8]}, "obs_frac": 0.7},
            "solver": {"outer_iters": 60}, "repeat": 3}"#,
    )
    .unwrap();
    let mut face = ExperimentSpec::new(Command::Face);
    face.face = Some(serde_json::from_str(r#"{"region_blocks": 5}"#).unwrap());
    face.solver = Some(serde_json::json!({"outer_iters": 20}));
    let mut checked = 0;
    let mut differing = Vec::new();
    for (name, spec) in [("ablation", &synth), ("face", &face)] {
        let a = tmp.join(format!("ac12-{name}-a"));
        let b = tmp.join(format!("ac12-{name}-b"));
        run_experiment(spec, &a).unwrap();
        run_experiment(spec, &b).unwrap();
        checked += 1;
        if strip_wall_time(&a.join("results.csv")) != strip_wall_time(&b.join("results.csv")) {
            differing.push(name);
        }
    }
    judge(differing.is_empty(), format!("{checked} specs re-run, results.csv differing: {differing:?}"))
}

fn main() {
    let tmp = tempfile::tempdir().unwrap();
    let t = tmp.path();
    let criteria: Vec<(&str, Box<dyn Fn() -> Outcome>)> = vec![
        ("generic rank equality", Box::new(ac1)),
        ("nuclear norm sandwich", Box::new(ac2)),
        ("Sinkhorn correctness", Box::new(ac3)),
        ("gradient fidelity", Box::new(ac4)),
        ("LAP exactness", Box::new(ac5)),
        ("Soft-Impute equivalence", Box::new(ac6)),
        ("single-block synthetic recovery", Box::new(|| ac7(t))),
        ("two-block correspondence table row", Box::new(|| ac8(t))),
        ("brute-force recovery within the error bound", Box::new(ac9)),
        ("nuclear norm ratio law", Box::new(ac10)),
        ("MovieLens RMSE ordering", Box::new(|| ac11(t))),
        ("determinism", Box::new(|| ac12(t))),
    ];
    let mut failed = Vec::new();
    for (k, (name, f)) in criteria.iter().enumerate() {
        let id = format!("AC{}", k + 1);
        let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|e| Outcome {
            verdict: Verdict::Fail,
            detail: format!(
                "panicked: {}",
                e.downcast_ref::<String>().cloned().or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string())).unwrap_or_default()
            ),
        });
        let tag = match outcome.verdict {
            Verdict::Pass => "PASS",
            Verdict::Fail => {
                failed.push(id.clone());
                "FAIL"
            }
            Verdict::Skip => "SKIP",
        };
        println!("{id:<5} {tag}  {name}: {}", outcome.detail);
    }
    if !failed.is_empty() {
        println!("failed criteria: {}", failed.join(", "));
        std::process::exit(1);
    }
}
