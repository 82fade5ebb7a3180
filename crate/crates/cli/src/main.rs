use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use unshuffle_cli::{run_experiment, Command, ExperimentSpec};

/// Recover low-rank matrices whose column blocks were row-shuffled.
#[derive(Parser, Debug)]
#[command(name = "unshuffle", version)]
struct Args {
    /// synth, ablation, dcorr-table, movielens, face or theory-check
    command: String,
    /// JSON experiment spec; defaults apply when omitted
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory; overrides `out` in the config
    #[arg(long)]
    out: Option<PathBuf>,
    /// Comma-separated run seeds; overrides `seeds` in the config
    #[arg(long, value_delimiter = ',')]
    seeds: Vec<u64>,
    /// Worker threads
    #[arg(long)]
    threads: Option<usize>,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let args = Args::parse();
    let Some(command) = Command::parse(&args.command) else {
        eprintln!("error: unknown command `{}`", args.command);
        return ExitCode::from(2);
    };
    let mut spec = match &args.config {
        Some(path) => match std::fs::read_to_string(path).map_err(Into::into).and_then(|t| ExperimentSpec::from_json(&t)) {
            Ok(s) => s,
            Err(e) => {
                eprintln!("error: {}: {e}", path.display());
                return ExitCode::from(2);
            }
        },
        None => ExperimentSpec::new(command),
    };
    if spec.command.is_some_and(|c| c != command) {
        eprintln!("error: config is for `{}`, not `{}`", spec.command.unwrap().name(), command.name());
        return ExitCode::from(2);
    }
    spec.command = Some(command);
    if !args.seeds.is_empty() {
        spec.seeds = args.seeds.clone();
    }
    if let Some(out) = &args.out {
        spec.out = Some(out.clone());
    }
    if let Some(k) = args.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(k).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    }
    if let Err(e) = spec.validate() {
        eprintln!("error: invalid spec: {e}");
        return ExitCode::from(2);
    }
    let out = spec.out.clone().unwrap_or_else(|| PathBuf::from("out").join(command.name()));
    match run_experiment(&spec, &out) {
        Ok(files) => {
            for f in files {
                println!("{}", f.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
