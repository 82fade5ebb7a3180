//! `results.csv` rows and the aggregates of `summary.json`.

use std::path::Path;

use serde::{Deserialize, Serialize};
use unshuffle_core::error::{invalid, Error, Result};
use unshuffle_core::solvers::RecoveryResult;

pub const RESULTS_HEADER: [&str; 10] = [
    "seed",
    "algorithm",
    "block",
    "d_hamming",
    "norm_perm_err",
    "rmse_train",
    "rmse_test",
    "objective",
    "iters",
    "wall_ms",
];

/// Outcome of one `(seed, algorithm)` run.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunRecord {
    pub seed: u64,
    pub algorithm: String,
    pub d_hamming: Vec<usize>,
    pub norm_perm_err: Option<f64>,
    pub rmse_train: Option<f64>,
    pub rmse_test: Option<f64>,
    pub objective: Option<f64>,
    pub iters: usize,
    pub wall_ms: u128,
    pub error: Option<String>,
}

impl RunRecord {
    pub fn from_result(seed: u64, r: &RecoveryResult, wall_ms: u128) -> Self {
        RunRecord {
            seed,
            algorithm: r.algorithm.clone(),
            d_hamming: r.metrics.d_hamming.clone(),
            norm_perm_err: r.metrics.norm_perm_err,
            rmse_train: r.metrics.rmse_train,
            rmse_test: r.metrics.rmse_test,
            objective: Some(r.final_objective),
            iters: r.iterations,
            wall_ms,
            error: None,
        }
    }

    pub fn failed(seed: u64, algorithm: &str, err: &Error, wall_ms: u128) -> Self {
        RunRecord {
            seed,
            algorithm: algorithm.to_string(),
            d_hamming: Vec::new(),
            norm_perm_err: None,
            rmse_train: None,
            rmse_test: None,
            objective: None,
            iters: 0,
            wall_ms,
            error: Some(err.to_string()),
        }
    }
}

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn csv_err(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e))
}

/// One row per permuted block; failed runs get a single row with empty metrics.
pub fn write_results(path: &Path, records: &[RunRecord]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    w.write_record(RESULTS_HEADER).map_err(csv_err)?;
    for r in records {
        let common = |block: String, dh: String| {
            vec![
                r.seed.to_string(),
                r.algorithm.clone(),
                block,
                dh,
                opt(r.norm_perm_err),
                opt(r.rmse_train),
                opt(r.rmse_test),
                opt(r.objective),
                if r.error.is_some() { String::new() } else { r.iters.to_string() },
                r.wall_ms.to_string(),
            ]
        };
        if r.d_hamming.is_empty() {
            w.write_record(common(String::new(), String::new())).map_err(csv_err)?;
        }
        for (l, d) in r.d_hamming.iter().enumerate() {
            w.write_record(common((l + 1).to_string(), d.to_string())).map_err(csv_err)?;
        }
    }
    w.flush()?;
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
pub struct CsvRow {
    pub seed: u64,
    pub algorithm: String,
    pub block: Option<usize>,
    pub d_hamming: Option<usize>,
    pub norm_perm_err: Option<f64>,
    pub rmse_train: Option<f64>,
    pub rmse_test: Option<f64>,
    pub objective: Option<f64>,
    pub iters: Option<usize>,
    pub wall_ms: u128,
}

pub fn read_results(path: &Path) -> Result<Vec<CsvRow>> {
    let mut r = csv::Reader::from_path(path).map_err(csv_err)?;
    let header: Vec<String> = r.headers().map_err(csv_err)?.iter().map(String::from).collect();
    if header != RESULTS_HEADER {
        return Err(invalid(format!("unexpected results header {header:?}")));
    }
    r.deserialize().map(|row| row.map_err(csv_err)).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Stat {
    pub count: usize,
    pub mean: f64,
    /// Sample standard deviation; 0 for a single value.
    pub std: f64,
    pub min: f64,
    pub max: f64,
    pub median: f64,
}

impl Stat {
    pub fn of(values: &[f64]) -> Option<Stat> {
        if values.is_empty() {
            return None;
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = if values.len() > 1 {
            values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)
        } else {
            0.0
        };
        let mut sorted = values.to_vec();
        sorted.sort_by(f64::total_cmp);
        let k = sorted.len();
        let median = if k % 2 == 1 {
            sorted[k / 2]
        } else {
            (sorted[k / 2 - 1] + sorted[k / 2]) / 2.0
        };
        Some(Stat {
            count: k,
            mean,
            std: var.sqrt(),
            min: sorted[0],
            max: sorted[k - 1],
            median,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AlgorithmSummary {
    pub algorithm: String,
    pub runs: usize,
    pub failures: usize,
    pub norm_perm_err: Option<Stat>,
    /// Over every `(run, block)` row.
    pub d_hamming: Option<Stat>,
    pub rmse_train: Option<Stat>,
    pub rmse_test: Option<Stat>,
    pub objective: Option<Stat>,
    pub iters: Option<Stat>,
}

/// Aggregates per algorithm, in order of first appearance. Run-level
/// columns are taken once per `(seed, algorithm)`.
pub fn summarize(rows: &[CsvRow]) -> Vec<AlgorithmSummary> {
    let mut order: Vec<&str> = Vec::new();
    for r in rows {
        if !order.contains(&r.algorithm.as_str()) {
            order.push(&r.algorithm);
        }
    }
    order
        .into_iter()
        .map(|alg| {
            let mine: Vec<&CsvRow> = rows.iter().filter(|r| r.algorithm == alg).collect();
            let mut seen = Vec::new();
            let runs: Vec<&CsvRow> = mine
                .iter()
                .copied()
                .filter(|r| {
                    let fresh = !seen.contains(&r.seed);
                    seen.push(r.seed);
                    fresh
                })
                .collect();
            let col = |f: &dyn Fn(&CsvRow) -> Option<f64>| Stat::of(&runs.iter().filter_map(|r| f(r)).collect::<Vec<_>>());
            AlgorithmSummary {
                algorithm: alg.to_string(),
                runs: runs.len(),
                failures: runs.iter().filter(|r| r.objective.is_none()).count(),
                norm_perm_err: col(&|r| r.norm_perm_err),
                d_hamming: Stat::of(&mine.iter().filter_map(|r| r.d_hamming.map(|d| d as f64)).collect::<Vec<_>>()),
                rmse_train: col(&|r| r.rmse_train),
                rmse_test: col(&|r| r.rmse_test),
                objective: col(&|r| r.objective),
                iters: col(&|r| r.iters.map(|i| i as f64)),
            }
        })
        .collect()
}
