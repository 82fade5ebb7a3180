use unshuffle_core::completion::{soft_impute, soft_impute_step};
use unshuffle_core::data::{gen_synthetic, Scenario, ShuffleKind, SyntheticParams};
use unshuffle_core::lamat::{DenseMatrix, Mask, MaskedMatrix};
use unshuffle_core::perm::Permutation;
use unshuffle_core::rng::{gaussian_matrix, seeded};
use unshuffle_core::solvers::{
    solve_baseline, solve_m3o, solve_mus, BlockPartition, BlockSlots, CostProvider, InitStrategy, LambdaSchedule,
    SolverConfig,
};

fn scenario(seed: u64, n: usize, frac: f64, eta: f64) -> Scenario {
    let p = SyntheticParams {
        n,
        r: 3,
        eta,
        partition: BlockPartition::new(12, vec![8, 6]).unwrap(),
        obs_frac: frac,
        shuffle: ShuffleKind::Uniform,
    };
    gen_synthetic(&p, seed).unwrap()
}

/// Same scenario with every anchor entry observed.
fn with_full_anchor(sc: &Scenario) -> MaskedMatrix {
    let anchor = sc.partition.anchor;
    let mask = &sc.observed.mask;
    let (n, m) = mask.shape();
    let full = Mask::from_fn(n, m, |i, j| j < anchor || mask.get(i, j));
    let data = DenseMatrix::from_fn(n, m, |i, j| {
        if j < anchor {
            sc.truth.as_ref().unwrap().matrix[(i, j)] + 0.01 * ((i * 7 + j) % 5) as f64
        } else {
            sc.observed.data[(i, j)]
        }
    });
    MaskedMatrix::new(data, full).unwrap()
}

fn frozen_config(sc: &Scenario, init: DenseMatrix, lam: f64, iters: usize) -> SolverConfig {
    SolverConfig {
        lambda: LambdaSchedule::Fixed(lam),
        rho_fixed: Some(0.5),
        outer_iters: iters,
        init: InitStrategy::Provided,
        init_matrix: Some(init),
        frozen_plans: Some(sc.truth.as_ref().unwrap().perms.clone()),
        decay_entropy: false,
        ..Default::default()
    }
}

fn max_abs_diff(a: &DenseMatrix, b: &DenseMatrix) -> f64 {
    (a - b).abs().max()
}

#[test]
fn one_frozen_step_is_a_soft_impute_step() {
    for seed in 0..5 {
        let sc = scenario(seed, 30, 0.6, 0.1);
        let obs = with_full_anchor(&sc);
        let init = gaussian_matrix(&mut seeded(100 + seed), 30, 26);
        let cfg = frozen_config(&sc, init.clone(), 0.7, 1);
        let res = solve_m3o(&obs, &sc.partition, &cfg, None).unwrap();

        let provider = BlockSlots::column_blocks(30, &sc.partition).unwrap();
        let aligned = provider.realign(&obs, &sc.truth.as_ref().unwrap().perms).unwrap();
        let step = soft_impute_step(&aligned, &init, 0.7).unwrap().matrix;
        let diff = max_abs_diff(&res.m_hat, &step);
        assert!(diff <= 1e-9, "seed {seed}: {diff}");
    }
}

#[test]
fn frozen_true_plans_converge_to_soft_impute() {
    let sc = scenario(3, 30, 0.7, 0.1);
    let init = DenseMatrix::zeros(30, 26);
    let mut cfg = frozen_config(&sc, init.clone(), 0.5, 5000);
    cfg.stop_tol = Some(1e-13);
    cfg.patience = 3;
    let res = solve_m3o(&sc.observed, &sc.partition, &cfg, None).unwrap();
    assert!(res.converged);

    let provider = BlockSlots::column_blocks(30, &sc.partition).unwrap();
    let aligned = provider.realign(&sc.observed, &sc.truth.as_ref().unwrap().perms).unwrap();
    let si = soft_impute(&aligned, 0.5, 1e-13, 5000, Some(&init)).unwrap();
    assert!(si.converged);
    let diff = max_abs_diff(&res.m_hat, &si.matrix);
    assert!(diff <= 1e-6, "{diff}");
}

#[test]
fn traces_are_finite_and_steps_capped() {
    let sc = scenario(1, 24, 0.8, 0.1);
    let mut cfg = SolverConfig::synthetic(0.5);
    cfg.outer_iters = 60;
    cfg.patience = 5;
    let res = solve_m3o(&sc.observed, &sc.partition, &cfg, None).unwrap();
    assert_eq!(res.objective_trace.len(), 60);
    assert!(res.objective_trace.iter().all(|v| v.is_finite()));
    for rhos in &res.stepsize_trace {
        assert_eq!(rhos.len(), 2);
        assert!(rhos.iter().all(|&r| r > 0.0 && r <= cfg.step_cap));
    }
    for (k, &eps) in res.entropy_trace.iter().enumerate() {
        let before = res.events.iter().filter(|e| e.kind == "entropy" && e.iteration < k).count();
        assert_eq!(eps, 0.1 / 2f64.powi(before as i32));
    }
    let again = solve_m3o(&sc.observed, &sc.partition, &cfg, None).unwrap();
    assert_eq!(res.events, again.events);
}

#[test]
fn results_do_not_depend_on_thread_count() {
    let sc = scenario(2, 24, 0.7, 0.1);
    let mut cfg = SolverConfig::synthetic(0.5);
    cfg.outer_iters = 40;
    let run = |threads: usize| {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        pool.install(|| solve_m3o(&sc.observed, &sc.partition, &cfg, None).unwrap())
    };
    let a = run(1);
    let b = run(4);
    assert_eq!(a.m_hat, b.m_hat);
    assert_eq!(a.objective_trace, b.objective_trace);
    assert_eq!(a.rounded_perms, b.rounded_perms);
    assert_eq!(a.final_objective.to_bits(), b.final_objective.to_bits());
}

#[test]
fn every_solver_returns_valid_permutations() {
    let sc = scenario(4, 24, 0.8, 0.05);
    let mut cfg = SolverConfig::synthetic(0.5);
    cfg.outer_iters = 20;
    let results = [
        solve_m3o(&sc.observed, &sc.partition, &cfg, None).unwrap(),
        solve_baseline(&sc.observed, &sc.partition, &cfg, None).unwrap(),
        solve_mus(&sc.observed, &sc.partition, &cfg).unwrap(),
    ];
    for r in &results {
        assert_eq!(r.rounded_perms.len(), 2);
        assert_eq!(r.rounded_perms[0].len(), 24);
        assert_eq!(r.m_hat.shape(), (24, 26));
        assert!(r.final_objective.is_finite());
        let mut sorted = r.rounded_perms[1].as_slice().to_vec();
        sorted.sort_unstable();
        assert_eq!(sorted, (0..24).collect::<Vec<_>>());
    }
}

#[test]
fn identity_shuffle_on_clean_data_is_left_alone_by_the_oracle_start() {
    let p = SyntheticParams {
        n: 20,
        r: 2,
        eta: 0.0,
        partition: BlockPartition::new(10, vec![6]).unwrap(),
        obs_frac: 1.0,
        shuffle: ShuffleKind::Identity,
    };
    let sc = gen_synthetic(&p, 9).unwrap();
    let truth = sc.truth.as_ref().unwrap();
    let cfg = SolverConfig {
        lambda: LambdaSchedule::Fixed(1e-3),
        init: InitStrategy::Provided,
        init_matrix: Some(truth.matrix.clone()),
        outer_iters: 30,
        eps_ent_init: 1e-3,
        ..Default::default()
    };
    let res = solve_m3o(&sc.observed, &sc.partition, &cfg, None).unwrap();
    assert!(res.rounded_perms[0].is_identity());
    assert_eq!(res.rounded_perms[0], Permutation::identity(20));
}
