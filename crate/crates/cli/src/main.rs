//! Command-line front end. Exit status: 0 when every check passes, 2 on an
//! acceptance failure, 3 on an input error.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use kinetic_ergo::harness::{run_experiment, ExperimentConfig, Pipeline};
use kinetic_ergo::Error;

#[derive(Parser)]
#[command(
    name = "kinetic-ergo",
    version,
    about = "Ergodicity experiments for kinetic SDEs"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// JSON experiment config.
    #[arg(long)]
    config: PathBuf,
    /// Overrides the seed in the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory; defaults to `output.dir` in the config, then `out`.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// W2 and entropy decay of the classical SDE.
    ErgodicityClassical(Common),
    /// Decay of the mean-field particle system and its Picard fixed point.
    ErgodicityMv(Common),
    /// Squared marginal W2 against the particle count.
    ChaosScan(Common),
    /// Checks of the modified-norm apparatus.
    HypoVerify(Common),
    /// Dissipativity cert check or search.
    Dissipativity(Common),
    /// Same as `dissipativity`, with an optional trial count override.
    CheckDissipativity {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        trials: Option<usize>,
    },
    /// Picard iteration for the stationary McKean-Vlasov law.
    MvFixedPoint(Common),
}

const EXIT_FAIL: u8 = 2;
const EXIT_INPUT: u8 = 3;

fn exit_code(e: &Error) -> u8 {
    match e.root() {
        Error::Divergence { .. }
        | Error::NonContraction { .. }
        | Error::InsufficientPoints { .. }
        | Error::NonFinite(_)
        | Error::SingularCovariance(_) => EXIT_FAIL,
        _ => EXIT_INPUT,
    }
}

fn run(pipeline: Pipeline, common: Common, trials: Option<usize>) -> Result<bool, Error> {
    let mut cfg = ExperimentConfig::load(&common.config)?;
    if cfg.pipeline != pipeline {
        return Err(Error::Config(format!(
            "config is for `{}`, not `{}`",
            cfg.pipeline.name(),
            pipeline.name()
        )));
    }
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    if let Some(t) = trials {
        cfg.dissipativity
            .get_or_insert_with(Default::default)
            .trials = t;
    }
    let out = common
        .out
        .or_else(|| {
            cfg.output
                .as_ref()
                .and_then(|o| o.dir.clone())
                .map(PathBuf::from)
        })
        .unwrap_or_else(|| PathBuf::from("out"));
    let report = run_experiment(&cfg, &out)?;
    for c in &report.checks {
        let value = c.value.map_or("-".to_string(), |v| format!("{v:.6}"));
        println!(
            "[{}] {}: {} (target {})",
            if c.passed { "PASS" } else { "FAIL" },
            c.name,
            value,
            c.target
        );
    }
    if let Some(w) = report.summary["results"]
        .get("witness")
        .filter(|w| !w.is_null())
    {
        println!("witness: {w}");
    }
    println!("report written to {}", out.display());
    Ok(report.passed)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (pipeline, common, trials) = match cli.command {
        Command::ErgodicityClassical(c) => (Pipeline::ErgodicityClassical, c, None),
        Command::ErgodicityMv(c) => (Pipeline::ErgodicityMv, c, None),
        Command::ChaosScan(c) => (Pipeline::ChaosScan, c, None),
        Command::HypoVerify(c) => (Pipeline::HypoVerify, c, None),
        Command::Dissipativity(c) => (Pipeline::Dissipativity, c, None),
        Command::CheckDissipativity { common, trials } => (Pipeline::Dissipativity, common, trials),
        Command::MvFixedPoint(c) => (Pipeline::MvFixedPoint, c, None),
    };
    match run(pipeline, common, trials) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(EXIT_FAIL),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
