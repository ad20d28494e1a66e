//! `mildlab run <config>` and `mildlab validate <config>`.
//!
//! Exit codes: 0 success, 1 I/O failure while writing artifacts, 2 invalid
//! configuration, 3 solver failure (partial artifacts are still written).

mod artifacts;
mod run;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use mildlab::config::{ExperimentConfig, SolverSpec};

use run::{run_experiment, CliError};

#[derive(Parser)]
#[command(name = "mildlab", version, about = "Convergence experiments for singularly perturbed semilinear equations")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every sweep in a config and write the artifacts.
    Run(RunArgs),
    /// Parse and check a config without solving anything.
    Validate { config: PathBuf },
}

#[derive(Args)]
struct RunArgs {
    config: PathBuf,
    /// Output directory; overrides `output` in the config.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overrides `seed` in the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads for the sweep.
    #[arg(long, env = "MILDLAB_THREADS")]
    threads: Option<usize>,
    /// picard, expeuler or both; overrides `solver` in the config.
    #[arg(long)]
    solver: Option<SolverSpec>,
}

fn load(path: &Path) -> Result<ExperimentConfig, CliError> {
    Ok(ExperimentConfig::load(path)?)
}

fn validate(path: &Path) -> Result<(), CliError> {
    let cfg = load(path)?;
    let mp = cfg.build_model()?;
    let x = cfg.initial_state(&mp)?;
    for w in mp.admissibility_warnings(&x.values) {
        eprintln!("warning: {w}");
    }
    let resolved = toml::to_string_pretty(&cfg).map_err(|e| CliError::Io(format!("cannot render resolved config: {e}")))?;
    println!("# {} is valid; resolved settings:", path.display());
    print!("{resolved}");
    println!("# model {} with {} unknowns, sweep {:?}", mp.name, mp.dim(), cfg.sweep_params(&mp));
    Ok(())
}

fn run(args: RunArgs) -> Result<(), CliError> {
    let mut cfg = load(&args.config)?;
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if let Some(solver) = args.solver {
        cfg.solver = solver;
    }
    if let Some(n) = args.threads {
        if n == 0 {
            return Err(CliError::Usage("--threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Usage(format!("cannot start {n} threads: {e}")))?;
    }
    let out = args.out.or_else(|| cfg.output.clone()).unwrap_or_else(|| PathBuf::from("mildlab-out"));
    let outcome = run_experiment(&cfg, &out)?;
    for (solver, class) in &outcome.classifications {
        println!("{solver}: {class:?}");
    }
    println!("artifacts written to {}", out.display());
    if outcome.failures > 0 {
        return Err(CliError::Solver(format!("{} sweep point(s) failed; results in {} are partial", outcome.failures, out.display())));
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(args) => run(args),
        Command::Validate { config } => validate(&config),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
