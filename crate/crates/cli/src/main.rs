use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use kerr_tfd_cli::bench::{self, BenchOptions};
use kerr_tfd_cli::validate::{self, Suite};
use kerr_tfd_cli::{simulate, write_outputs, CliError, Engine, RunSpec};

/// Thermofield-dynamics simulation of damped Kerr media.
#[derive(Parser)]
#[command(name = "kerr-tfd", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evolve the initial state of a run spec over its time grid.
    Simulate(RunArgs),
    /// `simulate` with the engine forced to `compare`.
    Compare(RunArgs),
    /// Run a property suite and print measured defects.
    Validate {
        #[arg(long, value_enum, default_value = "all")]
        suite: Suite,
    },
    /// Time closed-form, per-sector and dense evolution.
    Bench {
        #[arg(long, default_value_t = 5)]
        repeats: usize,
        #[arg(long, default_value_t = bench::BENCH_DENSE_CAP)]
        dense_cap: usize,
    },
}

#[derive(Args)]
struct RunArgs {
    /// Run spec (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Trajectory CSV; overrides `output.path`. Without either, CSV goes to stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Disable tail pruning in the closed form.
    #[arg(long)]
    strict: bool,
    /// Leave the timestamp out of the metadata sidecar.
    #[arg(long)]
    no_timestamp: bool,
}

fn run_spec(args: &RunArgs, force_compare: bool) -> Result<(), CliError> {
    let mut spec = RunSpec::load(&args.config)?;
    if force_compare {
        spec.engine = Engine::Compare;
    }
    let trajectory = simulate(&spec, args.strict)?;
    let out = args
        .out
        .clone()
        .or_else(|| spec.output.as_ref().map(|o| PathBuf::from(&o.path)));
    match out {
        Some(path) => {
            let meta = write_outputs(&spec, &trajectory, &path, args.strict, !args.no_timestamp)?;
            eprintln!("wrote {} and {}", path.display(), meta.display());
        }
        None => print!("{}", trajectory.to_csv()),
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Simulate(args) => run_spec(&args, false),
        Command::Compare(args) => run_spec(&args, true),
        Command::Validate { suite } => {
            let report = validate::run(suite);
            print!("{}", report.render());
            match report.failures() {
                0 => Ok(()),
                failed => Err(CliError::Validation { failed }),
            }
        }
        Command::Bench { repeats, dense_cap } => {
            let options = BenchOptions {
                repeats: repeats.max(1),
                dense_cap,
                ..BenchOptions::default()
            };
            print!("{}", bench::header());
            bench::run_with(options, |row| print!("{}", bench::format_row(row)))
                .map(|()| print!("{}", bench::footer(options.repeats)))
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
