//! Batch experiment runner: builds scenarios from a JSON spec, runs every
//! requested algorithm under every seed, and writes `results.csv`,
//! `summary.json`, traces and SVG plots.

pub mod algorithms;
pub mod plot;
pub mod report;
pub mod spec;
pub mod theory_check;

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use log::{info, warn};
use rayon::prelude::*;
use serde::Serialize;
use unshuffle_core::data::{
    build_movielens, gen_synthetic, parse_items, parse_ratings, read_pgm, shuffle_image_blocks, write_pgm, BlockRegion,
    GrayImage, MovieLensOptions, Scenario, SyntheticParams,
};
use unshuffle_core::error::Result;
use unshuffle_core::lamat::DenseMatrix;
use unshuffle_core::solvers::{BlockSlots, CostProvider, RecoveryResult, SolverConfig};

pub use algorithms::{run_algorithm, Algorithm, RunInput};
pub use report::{read_results, summarize, write_results, AlgorithmSummary, CsvRow, RunRecord, Stat, RESULTS_HEADER};
pub use spec::{Command, ExperimentSpec, FaceSpec, MovieLensSpec, Sweep, SweepParam, TheorySpec};

#[derive(Clone, Debug, Serialize)]
pub struct Failure {
    pub seed: u64,
    pub algorithm: String,
    pub error: String,
}

#[derive(Clone, Debug, Serialize)]
pub struct Summary {
    pub command: String,
    pub seeds: Vec<u64>,
    pub algorithms: Vec<AlgorithmSummary>,
    pub failures: Vec<Failure>,
}

/// A scenario together with its slot layout when it is not plain column blocks.
pub struct Instance {
    pub scenario: Scenario,
    pub provider: Option<BlockSlots>,
}

struct Batch<'a> {
    command: Command,
    algorithms: &'a [Algorithm],
    seeds: &'a [u64],
    config: &'a SolverConfig,
    de_stepsize: f64,
    keep_estimates: bool,
}

struct Run {
    record: RunRecord,
    result: Option<RecoveryResult>,
}

fn write_json<T: Serialize>(path: &Path, v: &T) -> Result<()> {
    fs::write(path, serde_json::to_string_pretty(v)? + "\n")?;
    Ok(())
}

fn write_traces(path: &Path, runs: &[Run]) -> Result<()> {
    let mut out = String::from("seed,algorithm,iteration,objective,entropy,lambda,stepsize\n");
    for r in runs {
        let Some(res) = &r.result else { continue };
        for k in 0..res.objective_trace.len() {
            let steps = res.stepsize_trace.get(k).filter(|s| !s.is_empty());
            let rho = steps.map(|s| (s.iter().sum::<f64>() / s.len() as f64).to_string()).unwrap_or_default();
            out.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                r.record.seed, res.algorithm, k, res.objective_trace[k], res.entropy_trace[k], res.lambda_trace[k], rho
            ));
        }
    }
    fs::write(path, out)?;
    Ok(())
}

fn objective_plot(path: &Path, runs: &[Run], seed: u64) -> Result<()> {
    let series: Vec<plot::Series> = runs
        .iter()
        .filter(|r| r.record.seed == seed)
        .filter_map(|r| r.result.as_ref())
        .map(|res| plot::Series {
            name: res.algorithm.clone(),
            points: res.objective_trace.iter().enumerate().map(|(k, &v)| (k as f64, v)).collect(),
        })
        .collect();
    let chart = plot::Chart {
        title: &format!("objective, seed {seed}"),
        x_label: "iteration",
        y_label: "objective",
        style: plot::Style::Line,
        log_y: true,
    };
    fs::write(path, chart.render(&series))?;
    Ok(())
}

fn metric_plot(path: &Path, records: &[RunRecord], name: &str, f: impl Fn(&RunRecord) -> Option<f64>) -> Result<()> {
    let mut series: Vec<plot::Series> = Vec::new();
    for r in records {
        let Some(v) = f(r) else { continue };
        match series.iter_mut().find(|s| s.name == r.algorithm) {
            Some(s) => s.points.push((r.seed as f64, v)),
            None => series.push(plot::Series {
                name: r.algorithm.clone(),
                points: vec![(r.seed as f64, v)],
            }),
        }
    }
    let chart = plot::Chart {
        title: name,
        x_label: "seed",
        y_label: name,
        style: plot::Style::Points,
        log_y: false,
    };
    fs::write(path, chart.render(&series))?;
    Ok(())
}

fn run_batch(out: &Path, batch: &Batch, instance: &(dyn Fn(u64) -> Result<Instance> + Sync)) -> Result<(Vec<PathBuf>, Summary, Vec<Run>)> {
    fs::create_dir_all(out)?;
    let instances: Vec<Instance> = batch.seeds.iter().map(|&s| instance(s)).collect::<Result<_>>()?;
    let jobs: Vec<(Algorithm, usize)> = batch
        .algorithms
        .iter()
        .flat_map(|&a| (0..batch.seeds.len()).map(move |k| (a, k)))
        .collect();
    let runs: Vec<Run> = jobs
        .par_iter()
        .map(|&(alg, k)| {
            let seed = batch.seeds[k];
            let inst = &instances[k];
            let input = RunInput {
                scenario: &inst.scenario,
                provider: inst.provider.as_ref().map(|p| p as &dyn CostProvider),
                config: batch.config,
                de_stepsize: batch.de_stepsize,
            };
            let t0 = Instant::now();
            match run_algorithm(alg, &input, seed) {
                Ok(res) => {
                    let ms = t0.elapsed().as_millis();
                    info!("{} seed {seed}: objective {:.6e} in {ms} ms", alg.name(), res.final_objective);
                    Run {
                        record: RunRecord::from_result(seed, &res, ms),
                        result: Some(res),
                    }
                }
                Err(e) => {
                    warn!("{} seed {seed} failed: {e}", alg.name());
                    Run {
                        record: RunRecord::failed(seed, alg.name(), &e, t0.elapsed().as_millis()),
                        result: None,
                    }
                }
            }
        })
        .collect();

    let records: Vec<RunRecord> = runs.iter().map(|r| r.record.clone()).collect();
    let results = out.join("results.csv");
    write_results(&results, &records)?;
    let summary = Summary {
        command: batch.command.name().to_string(),
        seeds: batch.seeds.to_vec(),
        algorithms: summarize(&read_results(&results)?),
        failures: records
            .iter()
            .filter_map(|r| {
                r.error.as_ref().map(|e| Failure {
                    seed: r.seed,
                    algorithm: r.algorithm.clone(),
                    error: e.clone(),
                })
            })
            .collect(),
    };
    let mut files = vec![results, out.join("summary.json"), out.join("traces.csv"), out.join("objective.svg")];
    write_json(&files[1], &summary)?;
    write_traces(&files[2], &runs)?;
    objective_plot(&files[3], &runs, batch.seeds[0])?;
    for (name, f) in [
        ("norm_perm_err", (|r: &RunRecord| r.norm_perm_err) as fn(&RunRecord) -> Option<f64>),
        ("rmse_test", |r: &RunRecord| r.rmse_test),
    ] {
        if records.iter().any(|r| f(r).is_some()) {
            let p = out.join(format!("{name}.svg"));
            metric_plot(&p, &records, name, f)?;
            files.push(p);
        }
    }
    let runs = if batch.keep_estimates {
        runs
    } else {
        runs.into_iter()
            .map(|mut r| {
                if let Some(res) = r.result.as_mut() {
                    res.m_hat = DenseMatrix::zeros(0, 0);
                }
                r
            })
            .collect()
    };
    Ok((files, summary, runs))
}

fn synthetic_instance(p: SyntheticParams, data_seed: Option<u64>) -> impl Fn(u64) -> Result<Instance> + Sync {
    move |seed| {
        Ok(Instance {
            scenario: gen_synthetic(&p, data_seed.unwrap_or(seed))?,
            provider: None,
        })
    }
}

#[derive(Serialize)]
struct SweepPoint {
    label: String,
    value: f64,
    algorithms: Vec<AlgorithmSummary>,
}

fn sweep_plots(out: &Path, sweep: &Sweep, points: &[SweepPoint]) -> Result<Vec<PathBuf>> {
    let mut files = Vec::new();
    let xname = sweep.label(0.0).trim_end_matches("=0").to_string();
    for (metric, get) in [
        ("norm_perm_err", (|a: &AlgorithmSummary| a.norm_perm_err.as_ref().map(|s| s.mean)) as fn(&AlgorithmSummary) -> Option<f64>),
        ("rmse_test", |a: &AlgorithmSummary| a.rmse_test.as_ref().map(|s| s.mean)),
    ] {
        let mut series: Vec<plot::Series> = Vec::new();
        for p in points {
            for a in &p.algorithms {
                let Some(v) = get(a) else { continue };
                match series.iter_mut().find(|s| s.name == a.algorithm) {
                    Some(s) => s.points.push((p.value, v)),
                    None => series.push(plot::Series {
                        name: a.algorithm.clone(),
                        points: vec![(p.value, v)],
                    }),
                }
            }
        }
        if series.is_empty() {
            continue;
        }
        let chart = plot::Chart {
            title: &format!("mean {metric}"),
            x_label: &xname,
            y_label: metric,
            style: plot::Style::Line,
            log_y: false,
        };
        let path = out.join(format!("sweep_{metric}.svg"));
        fs::write(&path, chart.render(&series))?;
        files.push(path);
    }
    Ok(files)
}

/// Smooth stand-in portrait used when no image file is configured.
pub fn test_portrait(h: usize, w: usize) -> GrayImage {
    let pixels = DenseMatrix::from_fn(h, w, |i, j| {
        let y = i as f64 / h as f64 - 0.5;
        let x = j as f64 / w as f64 - 0.5;
        let mut v = 0.25 + 0.2 * (x + 0.5);
        let face = (x / 0.32).powi(2) + (y / 0.42).powi(2);
        if face < 1.0 {
            v = 0.75 - 0.25 * face;
        }
        for ex in [-0.12, 0.12] {
            if ((x - ex) / 0.06).powi(2) + ((y + 0.1) / 0.035).powi(2) < 1.0 {
                v = 0.1;
            }
        }
        if (x / 0.03).powi(2) + (y / 0.09).powi(2) < 1.0 {
            v -= 0.15;
        }
        if (y - 0.18 - 2.0 * x * x).abs() < 0.02 && x.abs() < 0.13 {
            v = 0.2;
        }
        (v.clamp(0.0, 1.0) * 255.0).round() / 255.0
    });
    GrayImage { pixels }
}

fn face_instance(spec: &FaceSpec, image: GrayImage, data_seed: Option<u64>) -> impl Fn(u64) -> Result<Instance> + Sync + '_ {
    move |seed| {
        let s = shuffle_image_blocks(
            &image,
            (spec.block, spec.block),
            &BlockRegion::UpperLeft(spec.region_blocks),
            spec.missing_frac,
            data_seed.unwrap_or(seed),
        )?;
        Ok(Instance {
            scenario: s.scenario,
            provider: Some(s.provider),
        })
    }
}

/// Runs the experiment and returns the paths of every written artifact.
pub fn run_experiment(spec: &ExperimentSpec, out: &Path) -> Result<Vec<PathBuf>> {
    spec.validate()?;
    let command = spec.command()?;
    fs::create_dir_all(out)?;
    let spec_path = out.join("spec.json");
    write_json(&spec_path, spec)?;
    let seeds = spec.seeds();
    let algorithms = spec.algorithms()?;
    let config = spec.solver_config()?;
    let batch = Batch {
        command,
        algorithms: &algorithms,
        seeds: &seeds,
        config: &config,
        de_stepsize: spec.de_stepsize,
        keep_estimates: command == Command::Face,
    };
    let mut files = vec![spec_path];
    match command {
        Command::Synth | Command::Ablation | Command::DcorrTable => {
            let base = spec.synthetic.clone().expect("validated");
            match &spec.sweep {
                None => files.extend(run_batch(out, &batch, &synthetic_instance(base, spec.data_seed))?.0),
                Some(sweep) => {
                    let mut points = Vec::new();
                    for &v in &sweep.values {
                        let label = sweep.label(v);
                        let p = sweep.apply(&base, v);
                        let (f, summary, _) = run_batch(&out.join(&label), &batch, &synthetic_instance(p, spec.data_seed))?;
                        files.extend(f);
                        points.push(SweepPoint {
                            label,
                            value: v,
                            algorithms: summary.algorithms,
                        });
                    }
                    let path = out.join("sweep.json");
                    write_json(&path, &points)?;
                    files.push(path);
                    files.extend(sweep_plots(out, sweep, &points)?);
                }
            }
        }
        Command::Movielens => {
            let ml = spec.movielens.clone().expect("validated");
            let ratings = parse_ratings(&fs::read_to_string(ml.path.join("u.data"))?)?;
            let raw = fs::read(ml.path.join("u.item"))?;
            let items = parse_items(&raw.iter().map(|&b| b as char).collect::<String>())?;
            let data_seed = spec.data_seed;
            let instance = move |seed: u64| {
                let opts = MovieLensOptions {
                    genres: ml.genres.clone(),
                    train_frac: ml.train_frac,
                    seed: data_seed.unwrap_or(seed),
                };
                Ok(Instance {
                    scenario: build_movielens(&ratings, &items, &opts)?.scenario,
                    provider: None,
                })
            };
            files.extend(run_batch(out, &batch, &instance)?.0);
        }
        Command::Face => {
            let fs_spec = spec.face.clone().unwrap_or_default();
            let image = match &fs_spec.image {
                Some(p) => read_pgm(p)?,
                None => test_portrait(180, 180),
            };
            let instance = face_instance(&fs_spec, image.clone(), spec.data_seed);
            let first = instance(seeds[0])?;
            let (f, _, runs) = run_batch(out, &batch, &instance)?;
            files.extend(f);
            let mut imgs = vec![(out.join("original.pgm"), image.pixels.clone())];
            let obs = &first.scenario.observed;
            imgs.push((
                out.join("observed.pgm"),
                DenseMatrix::from_fn(image.height(), image.width(), |i, j| if obs.mask.get(i, j) { obs.data[(i, j)] } else { 0.0 }),
            ));
            for r in runs.iter().filter(|r| r.record.seed == seeds[0]) {
                if let Some(res) = &r.result {
                    imgs.push((out.join(format!("{}.pgm", res.algorithm)), res.m_hat.clone()));
                }
            }
            for (p, m) in imgs {
                write_pgm(&p, &GrayImage { pixels: m })?;
                files.push(p);
            }
        }
        Command::TheoryCheck => {
            let t = spec.theory.clone().unwrap_or_default();
            let report = theory_check::run(&t, seeds[0])?;
            let path = out.join("report.json");
            write_json(&path, &report)?;
            files.push(path);
            let svg = out.join("ratio_curve.svg");
            fs::write(&svg, theory_check::ratio_plot(&report, t.ratio_n))?;
            files.push(svg);
        }
    }
    Ok(files)
}
