use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde::Deserialize;
use serde_json::json;

use fedsieve::oracle::{cof_oracle, gm_oracle, krum_oracle};
use fedsieve::sim::{
    convergence_probe, emit, run_experiment, ExperimentConfig, Format, ProbeConfig,
};
use fedsieve::{Error, Result};

#[derive(Parser)]
#[command(
    name = "fedsieve",
    version,
    about = "Federated backdoor simulator with layer-wise outlier filtering"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a federated experiment and write per-round metrics.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Overrides the config seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory (defaults to `[output].dir`, then `out/`).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the quadratic convergence probe and print the gap series as JSON.
    ProbeConvergence {
        #[arg(long)]
        config: PathBuf,
    },
    /// Evaluate a brute-force reference implementation on JSON input.
    Oracle {
        kind: OracleKind,
        #[arg(long)]
        input: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum OracleKind {
    Cof,
    Krum,
    Gm,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct OracleInput {
    points: Vec<Vec<f64>>,
    k: Option<usize>,
    f: Option<usize>,
    #[serde(default = "steps")]
    steps: usize,
    #[serde(default = "levels")]
    levels: usize,
}

fn steps() -> usize {
    21
}
fn levels() -> usize {
    30
}

fn run(config: &Path, seed: Option<u64>, out: Option<PathBuf>) -> Result<()> {
    let mut cfg = ExperimentConfig::load(config)?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    let dir = out
        .or_else(|| cfg.output.as_ref().map(|o| o.dir.clone()))
        .unwrap_or_else(|| PathBuf::from("out"));
    let (csv, jsonl) = cfg
        .output
        .as_ref()
        .map_or((true, true), |o| (o.csv, o.jsonl));
    let records = run_experiment(&cfg)?;
    std::fs::create_dir_all(&dir)?;
    if csv {
        emit(&records, dir.join("metrics.csv"), Format::Csv)?;
    }
    if jsonl {
        emit(&records, dir.join("metrics.jsonl"), Format::JsonLines)?;
    }
    if let Some(last) = records.last() {
        eprintln!(
            "round {}: MA={:.4} BA={:.4} benign={}",
            last.round,
            last.ma,
            last.ba,
            last.benign_set.len()
        );
    }
    Ok(())
}

fn oracle(kind: OracleKind, input: &Path) -> Result<serde_json::Value> {
    let inp: OracleInput = serde_json::from_str(&std::fs::read_to_string(input)?)?;
    let n = inp.points.len();
    Ok(match kind {
        OracleKind::Cof => {
            json!({ "scores": cof_oracle(&inp.points, inp.k.unwrap_or(n.saturating_sub(1)))? })
        }
        OracleKind::Krum => {
            let f = inp.f.unwrap_or(n.div_ceil(4));
            serde_json::to_value(krum_oracle(&inp.points, f)?)?
        }
        OracleKind::Gm => json!({ "median": gm_oracle(&inp.points, inp.steps, inp.levels)? }),
    })
}

fn dispatch(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run { config, seed, out } => run(&config, seed, out),
        Command::ProbeConvergence { config } => {
            let report = convergence_probe(&ProbeConfig::load(config)?)?;
            println!("{}", serde_json::to_string(&report)?);
            Ok(())
        }
        Command::Oracle { kind, input } => {
            println!("{}", oracle(kind, &input)?);
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    match dispatch(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            if matches!(e, Error::Config(_)) {
                ExitCode::from(2)
            } else {
                ExitCode::FAILURE
            }
        }
    }
}
