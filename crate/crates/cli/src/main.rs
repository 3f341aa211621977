use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use lpir::{load_config, run, validate, Kind, Overrides, RunError};
use lpir_core::approx::GeometricMode;

#[derive(Parser)]
#[command(name = "lpir", version, about = "λ-policy iteration experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve a tabular MDP with λ-PIR, VI, OPI or PI.
    Solve(Common),
    /// Train a quadratic cost approximation on a control benchmark.
    Train(Common),
    /// Simulate the greedy closed loop (and the baseline for sincos).
    Simulate(Common),
    /// Cost slices of every training iterate.
    Slice(Common),
    /// Norm and pointwise gaps of the truncated weighted operator.
    Counterexample(Common),
    /// VI, OPI and λ-PIR side by side on one control problem.
    Compare(Common),
    /// Check a config without running it.
    Validate(Common),
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Unbiased,
    Paper,
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Geometric horizon parameterization for rollouts.
    #[arg(long, value_enum)]
    mode: Option<Mode>,
}

impl Common {
    fn overrides(&self, kind: Option<Kind>) -> Overrides {
        Overrides {
            kind,
            seed: self.seed,
            out: self.out.clone(),
            mode: self.mode.map(|m| match m {
                Mode::Unbiased => GeometricMode::Unbiased,
                Mode::Paper => GeometricMode::Paper,
            }),
        }
    }
}

fn execute(command: Command) -> Result<(), RunError> {
    let (common, kind) = match &command {
        Command::Solve(c) => (c, Some(Kind::Solve)),
        Command::Train(c) => (c, Some(Kind::Train)),
        Command::Simulate(c) => (c, Some(Kind::Simulate)),
        Command::Slice(c) => (c, Some(Kind::Slice)),
        Command::Counterexample(c) => (c, Some(Kind::Counterexample)),
        Command::Compare(c) => (c, Some(Kind::Compare)),
        Command::Validate(c) => (c, None),
    };
    let cfg = load_config(&common.config)?
        .resolve(&common.overrides(kind))
        .map_err(RunError::Invalid)?;
    if kind.is_none() {
        let diags = validate(&cfg);
        if diags.is_empty() {
            println!("{}: ok", common.config.display());
            return Ok(());
        }
        return Err(RunError::Invalid(diags));
    }
    let report = run(&cfg)?;
    println!("{} -> {}", report.kind.as_str(), cfg.out_dir().display());
    for a in &report.artifacts {
        println!("  {a}");
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
