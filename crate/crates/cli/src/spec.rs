use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use unshuffle_core::data::{Genre, SyntheticParams, GENRE_PRIORITY};
use unshuffle_core::error::{invalid, Result};
use unshuffle_core::solvers::SolverConfig;

use crate::algorithms::Algorithm;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Synth,
    Ablation,
    DcorrTable,
    Movielens,
    Face,
    TheoryCheck,
}

impl Command {
    pub fn parse(s: &str) -> Option<Command> {
        serde_json::from_value(serde_json::Value::String(s.to_string())).ok()
    }

    pub fn name(self) -> &'static str {
        match self {
            Command::Synth => "synth",
            Command::Ablation => "ablation",
            Command::DcorrTable => "dcorr-table",
            Command::Movielens => "movielens",
            Command::Face => "face",
            Command::TheoryCheck => "theory-check",
        }
    }

    fn synthetic(self) -> bool {
        matches!(self, Command::Synth | Command::Ablation | Command::DcorrTable)
    }

    fn default_algorithms(self) -> Vec<Algorithm> {
        use Algorithm::*;
        match self {
            Command::Synth | Command::DcorrTable => vec![M3o, Baseline, Mus],
            Command::Ablation => vec![M3o, M3oAs, M3oDe, Baseline, Mus],
            Command::Movielens => vec![M3o, Baseline, Mus, Oracle, Sic, Sir],
            Command::Face => vec![M3o, Baseline],
            Command::TheoryCheck => Vec::new(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParam {
    ObsFrac,
    Eta,
    Rank,
    /// Anchor width `m_A`; the permuted widths are kept.
    Anchor,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Sweep {
    pub param: SweepParam,
    pub values: Vec<f64>,
}

impl Sweep {
    pub fn apply(&self, base: &SyntheticParams, v: f64) -> SyntheticParams {
        let mut p = base.clone();
        match self.param {
            SweepParam::ObsFrac => p.obs_frac = v,
            SweepParam::Eta => p.eta = v,
            SweepParam::Rank => p.r = v.round() as usize,
            SweepParam::Anchor => p.partition.anchor = v.round() as usize,
        }
        p
    }

    pub fn label(&self, v: f64) -> String {
        let name = serde_json::to_value(self.param).ok().and_then(|x| x.as_str().map(String::from)).unwrap_or_default();
        format!("{name}={v}")
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MovieLensSpec {
    pub path: PathBuf,
    pub genres: Vec<Genre>,
    pub train_frac: f64,
}

impl Default for MovieLensSpec {
    fn default() -> Self {
        MovieLensSpec {
            path: PathBuf::from("ml-100k"),
            genres: GENRE_PRIORITY.to_vec(),
            train_frac: 0.8,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FaceSpec {
    /// P5 PGM; a generated test portrait is used when absent.
    pub image: Option<PathBuf>,
    pub block: usize,
    pub region_blocks: usize,
    pub missing_frac: f64,
}

impl Default for FaceSpec {
    fn default() -> Self {
        FaceSpec {
            image: None,
            block: 30,
            region_blocks: 13,
            missing_frac: 0.3,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TheorySpec {
    pub rank_n: usize,
    pub rank_m_a: usize,
    pub rank_m_b: usize,
    pub rank_r: usize,
    pub rank_trials: usize,
    pub sandwich_n: usize,
    pub sandwich_instances: usize,
    pub ratio_n: usize,
    pub ratio_r: usize,
    pub ratio_m_a: usize,
    pub ratio_m_b: usize,
    pub ratio_obs_fracs: Vec<f64>,
    pub ratio_h: Vec<usize>,
    pub ratio_lambda: f64,
    pub brute_n: usize,
    pub brute_instances: usize,
    pub brute_eps1: Vec<f64>,
}

impl Default for TheorySpec {
    fn default() -> Self {
        TheorySpec {
            rank_n: 32,
            rank_m_a: 8,
            rank_m_b: 8,
            rank_r: 3,
            rank_trials: 200,
            sandwich_n: 20,
            sandwich_instances: 500,
            ratio_n: 100,
            ratio_r: 5,
            ratio_m_a: 50,
            ratio_m_b: 50,
            ratio_obs_fracs: vec![1.0, 0.4],
            ratio_h: (0..10).map(|k| 10 * k).collect(),
            ratio_lambda: 0.5,
            brute_n: 7,
            brute_instances: 50,
            brute_eps1: vec![0.0, 0.05],
        }
    }
}

/// One experiment, read from a JSON document.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ExperimentSpec {
    /// May be left out of the file and supplied on the command line.
    #[serde(default)]
    pub command: Option<Command>,
    #[serde(default)]
    pub synthetic: Option<SyntheticParams>,
    #[serde(default)]
    pub sweep: Option<Sweep>,
    #[serde(default)]
    pub movielens: Option<MovieLensSpec>,
    #[serde(default)]
    pub face: Option<FaceSpec>,
    #[serde(default)]
    pub theory: Option<TheorySpec>,
    /// Solver settings; missing keys take the command's defaults.
    #[serde(default)]
    pub solver: Option<serde_json::Value>,
    #[serde(default)]
    pub algorithms: Vec<Algorithm>,
    /// Run seeds; `0..repeat` when empty.
    #[serde(default)]
    pub seeds: Vec<u64>,
    #[serde(default = "one")]
    pub repeat: usize,
    /// Fixes the scenario across runs so seeds only vary the initialization.
    #[serde(default)]
    pub data_seed: Option<u64>,
    /// Constant stepsize of the `m3o-de` variant.
    #[serde(default = "half")]
    pub de_stepsize: f64,
    #[serde(default)]
    pub out: Option<PathBuf>,
}

fn one() -> usize {
    1
}

fn half() -> f64 {
    0.5
}

impl ExperimentSpec {
    pub fn new(command: Command) -> Self {
        ExperimentSpec {
            command: Some(command),
            synthetic: None,
            sweep: None,
            movielens: None,
            face: None,
            theory: None,
            solver: None,
            algorithms: Vec::new(),
            seeds: Vec::new(),
            repeat: 1,
            data_seed: None,
            de_stepsize: 0.5,
            out: None,
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn command(&self) -> Result<Command> {
        self.command.ok_or_else(|| invalid("experiment spec names no command"))
    }

    pub fn seeds(&self) -> Vec<u64> {
        if self.seeds.is_empty() {
            (0..self.repeat as u64).collect()
        } else {
            self.seeds.clone()
        }
    }

    pub fn algorithms(&self) -> Result<Vec<Algorithm>> {
        Ok(if self.algorithms.is_empty() {
            self.command()?.default_algorithms()
        } else {
            self.algorithms.clone()
        })
    }

    /// The command's preset overlaid with the `solver` object.
    pub fn solver_config(&self) -> Result<SolverConfig> {
        let base = match self.command()? {
            Command::Movielens => SolverConfig::movielens(),
            Command::Face => SolverConfig::image_blocks(),
            _ => SolverConfig::default(),
        };
        let Some(over) = &self.solver else {
            return Ok(base);
        };
        let mut v = serde_json::to_value(&base)?;
        let obj = over.as_object().ok_or_else(|| invalid("`solver` must be a JSON object"))?;
        for (k, x) in obj {
            if v.get(k).is_none() {
                return Err(invalid(format!("unknown solver setting `{k}`")));
            }
            v[k] = x.clone();
        }
        Ok(serde_json::from_value(v)?)
    }

    pub fn validate(&self) -> Result<()> {
        let cmd = self.command()?;
        if self.repeat == 0 {
            return Err(invalid("repeat must be at least 1"));
        }
        if !(self.de_stepsize > 0.0) {
            return Err(invalid("de_stepsize must be positive"));
        }
        self.solver_config()?.validate()?;
        if cmd.synthetic() {
            let p = self.synthetic.as_ref().ok_or_else(|| invalid(format!("`{}` needs a `synthetic` section", cmd.name())))?;
            p.partition.check_width(p.partition.total())?;
            if cmd == Command::DcorrTable && p.partition.d() < 2 {
                return Err(invalid("dcorr-table needs at least two permuted blocks"));
            }
            if let Some(s) = &self.sweep {
                if s.values.is_empty() {
                    return Err(invalid("sweep needs at least one value"));
                }
            }
        } else if self.sweep.is_some() {
            return Err(invalid(format!("`{}` does not support sweeps", cmd.name())));
        }
        match cmd {
            Command::Movielens => {
                let m = self.movielens.as_ref().ok_or_else(|| invalid("`movielens` needs a `movielens` section"))?;
                for f in ["u.data", "u.item"] {
                    if !m.path.join(f).is_file() {
                        return Err(invalid(format!("{} not found", m.path.join(f).display())));
                    }
                }
            }
            Command::Face => {
                if let Some(p) = self.face.as_ref().and_then(|f| f.image.as_ref()) {
                    if !p.is_file() {
                        return Err(invalid(format!("image {} not found", p.display())));
                    }
                }
                if self.algorithms()?.contains(&Algorithm::Mus) {
                    return Err(invalid("mus needs column blocks and cannot run on image tiles"));
                }
            }
            _ => {}
        }
        Ok(())
    }
}
