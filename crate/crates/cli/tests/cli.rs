use std::path::Path;
use std::process::Command as Proc;

use unshuffle_cli::{read_results, run_experiment, summarize, AlgorithmSummary, Command, ExperimentSpec, Stat};

const SYNTH: &str = r#"{
  "command": "synth",
  "synthetic": {"n": 24, "r": 2, "eta": 0.1, "partition": {"anchor": 10, "widths": [6, 5]}, "obs_frac": 0.8},
  "solver": {"outer_iters": 15},
  "algorithms": ["m3o", "baseline", "mus", "oracle", "sic", "sir"],
  "seeds": [3, 1]
}"#;

fn without_wall_time(path: &Path) -> Vec<String> {
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .map(|l| l.rsplit_once(',').unwrap().0.to_string())
        .collect()
}

#[test]
fn rerun_reproduces_results() {
    let dir = tempfile::tempdir().unwrap();
    let spec = ExperimentSpec::from_json(SYNTH).unwrap();
    run_experiment(&spec, &dir.path().join("a")).unwrap();
    run_experiment(&spec, &dir.path().join("b")).unwrap();
    let a = without_wall_time(&dir.path().join("a/results.csv"));
    let b = without_wall_time(&dir.path().join("b/results.csv"));
    assert_eq!(a.len(), 1 + 6 * 2 * 2);
    assert_eq!(a, b);
    assert_eq!(
        std::fs::read(dir.path().join("a/traces.csv")).unwrap(),
        std::fs::read(dir.path().join("b/traces.csv")).unwrap()
    );
}

#[test]
fn summary_recomputes_from_csv() {
    let dir = tempfile::tempdir().unwrap();
    let spec = ExperimentSpec::from_json(SYNTH).unwrap();
    run_experiment(&spec, dir.path()).unwrap();
    let rows = read_results(&dir.path().join("results.csv")).unwrap();
    let summary: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("summary.json")).unwrap()).unwrap();
    let written: Vec<AlgorithmSummary> = serde_json::from_value(summary["algorithms"].clone()).unwrap();
    assert_eq!(written, summarize(&rows));
    let names: Vec<&str> = written.iter().map(|a| a.algorithm.as_str()).collect();
    assert_eq!(names, ["m3o", "baseline", "mus", "oracle", "sic", "sir"]);

    let m3o: Vec<f64> = rows
        .iter()
        .filter(|r| r.algorithm == "m3o" && r.block == Some(1))
        .map(|r| r.norm_perm_err.unwrap())
        .collect();
    assert_eq!(written[0].norm_perm_err, Stat::of(&m3o));
    let oracle = &written[3];
    assert_eq!(oracle.norm_perm_err.as_ref().unwrap().max, 0.0);
}

#[test]
fn oracle_is_exact_on_clean_full_data() {
    let dir = tempfile::tempdir().unwrap();
    let mut spec = ExperimentSpec::new(Command::Synth);
    spec.synthetic = Some(
        serde_json::from_str(r#"{"n": 30, "r": 3, "eta": 0.0, "partition": {"anchor": 12, "widths": [9]}, "obs_frac": 1.0}"#)
            .unwrap(),
    );
    spec.solver = Some(serde_json::json!({"lambda": {"fixed": 0.0}}));
    spec.algorithms = vec![unshuffle_cli::Algorithm::Oracle];
    run_experiment(&spec, dir.path()).unwrap();
    let rows = read_results(&dir.path().join("results.csv")).unwrap();
    assert_eq!(rows.len(), 1);
    assert!(rows[0].rmse_train.unwrap() < 1e-12);
    assert_eq!(rows[0].d_hamming, Some(0));
}

#[test]
fn failed_runs_are_recorded_and_others_continue() {
    let dir = tempfile::tempdir().unwrap();
    let spec = ExperimentSpec::from_json(
        r#"{
      "command": "synth",
      "synthetic": {"n": 16, "r": 2, "eta": 0.1, "partition": {"anchor": 0, "widths": [5, 5]}, "obs_frac": 0.9},
      "solver": {"outer_iters": 5},
      "algorithms": ["mus", "m3o"]
    }"#,
    )
    .unwrap();
    run_experiment(&spec, dir.path()).unwrap();
    let rows = read_results(&dir.path().join("results.csv")).unwrap();
    assert_eq!(rows.len(), 3);
    assert!(rows[0].objective.is_none() && rows[0].block.is_none());
    assert!(rows[1].objective.is_some());
    let summary: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["failures"][0]["algorithm"], "mus");
    assert!(summary["failures"][0]["error"].as_str().unwrap().contains("anchor"));
}

#[test]
fn sweep_writes_one_directory_per_value() {
    let dir = tempfile::tempdir().unwrap();
    let mut spec = ExperimentSpec::from_json(SYNTH).unwrap();
    spec.algorithms = vec![unshuffle_cli::Algorithm::Sic];
    spec.sweep = Some(serde_json::from_str(r#"{"param": "obs_frac", "values": [0.5, 0.9]}"#).unwrap());
    let files = run_experiment(&spec, dir.path()).unwrap();
    for d in ["obs_frac=0.5", "obs_frac=0.9"] {
        assert!(dir.path().join(d).join("results.csv").is_file());
    }
    let sweep: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("sweep.json")).unwrap()).unwrap();
    assert_eq!(sweep.as_array().unwrap().len(), 2);
    assert!(files.iter().all(|f| f.exists()));
    assert!(dir.path().join("sweep_rmse_test.svg").is_file());
}

#[test]
fn theory_check_reports_the_equality_fraction() {
    let dir = tempfile::tempdir().unwrap();
    let mut spec = ExperimentSpec::new(Command::TheoryCheck);
    spec.theory = Some(
        serde_json::from_str(
            r#"{"rank_trials": 20, "sandwich_instances": 20, "ratio_n": 30, "ratio_r": 2, "ratio_m_a": 10,
                "ratio_m_b": 10, "ratio_h": [0, 10, 20], "brute_n": 5, "brute_instances": 4}"#,
        )
        .unwrap(),
    );
    run_experiment(&spec, dir.path()).unwrap();
    let report: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("report.json")).unwrap()).unwrap();
    assert_eq!(report["generic_rank"]["fraction"], 1.0);
    assert_eq!(report["sandwich"]["all_hold"], true);
    assert_eq!(report["brute_force"][0]["exact"], 4);
    assert!(dir.path().join("ratio_curve.svg").is_file());
}

#[test]
fn face_writes_images() {
    let dir = tempfile::tempdir().unwrap();
    let mut spec = ExperimentSpec::new(Command::Face);
    spec.face = Some(serde_json::from_str(r#"{"block": 30, "region_blocks": 4}"#).unwrap());
    spec.solver = Some(serde_json::json!({"outer_iters": 5}));
    run_experiment(&spec, dir.path()).unwrap();
    for f in ["original.pgm", "observed.pgm", "m3o.pgm", "baseline.pgm"] {
        let img = unshuffle_core::data::read_pgm(&dir.path().join(f)).unwrap();
        assert_eq!((img.height(), img.width()), (180, 180));
    }
}

#[test]
fn binary_reports_usage_errors() {
    let exe = env!("CARGO_BIN_EXE_unshuffle");
    let dir = tempfile::tempdir().unwrap();
    let out = Proc::new(exe).args(["nonsense"]).output().unwrap();
    assert!(!out.status.success());
    let out = Proc::new(exe).args(["synth", "--out"]).arg(dir.path()).output().unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("synthetic"));
    let cfg = dir.path().join("bad.json");
    std::fs::write(&cfg, r#"{"repeat": 0}"#).unwrap();
    let out = Proc::new(exe).args(["theory-check", "--config"]).arg(&cfg).output().unwrap();
    assert!(!out.status.success());
}

#[test]
fn binary_runs_with_seed_override() {
    let exe = env!("CARGO_BIN_EXE_unshuffle");
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("synth.json");
    std::fs::write(&cfg, SYNTH).unwrap();
    let out = Proc::new(exe)
        .args(["synth", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(dir.path().join("run"))
        .args(["--seeds", "5,6,7", "--threads", "2"])
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let rows = read_results(&dir.path().join("run/results.csv")).unwrap();
    let mut seeds: Vec<u64> = rows.iter().map(|r| r.seed).collect();
    seeds.dedup();
    assert_eq!(&seeds[..3], &[5, 6, 7]);
}
