use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use fmqa::annealer::AnnealConfig;
use fmqa_cli::config::ExperimentConfig;
use fmqa_cli::plot::Format;
use fmqa_cli::solve::SolveOptions;
use fmqa_cli::{experiment, plot, report, solve, CliError, CliResult};

#[derive(Parser)]
#[command(name = "fmqa", version, about = "Surrogate-guided black-box optimization over one-hot grids")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every configured method for every trial and write the artifacts.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value = "results")]
        out: PathBuf,
        /// Worker threads; overrides experiment.parallel.
        #[arg(long)]
        parallel: Option<usize>,
        /// Base seed; overrides experiment.seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Bucketed activation counts per method from run records.
    CoverageReport {
        /// Record files, record directories or experiment directories.
        #[arg(required = true)]
        records: Vec<PathBuf>,
        #[arg(long, default_value = "coverage")]
        out: PathBuf,
    },
    /// Mean best-so-far curves from trajectory CSVs.
    Plot {
        /// Trajectory files or directories.
        #[arg(required = true)]
        trajectories: Vec<PathBuf>,
        #[arg(long, default_value = "plots")]
        out: PathBuf,
        #[arg(long, value_enum, default_value_t = Format::Svg)]
        format: Format,
    },
    /// Anneal a coordinate-format QUBO file and print the best state.
    SolveQubo {
        file: PathBuf,
        /// Indices in the file start at 1.
        #[arg(long)]
        one_based: bool,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        sweeps: Option<usize>,
        #[arg(long)]
        restarts: Option<usize>,
        /// Also print the exhaustive minimum (up to 24 bits).
        #[arg(long)]
        brute_force: bool,
    },
}

fn dispatch(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Run { config, out, parallel, seed } => {
            let mut cfg = ExperimentConfig::load(&config).map_err(CliError::Config)?;
            if let Some(s) = seed {
                cfg.experiment.seed = s;
            }
            let outcome = experiment::run_experiment(&cfg, &out, parallel)?;
            println!(
                "{} runs written to {} (config_hash={})",
                outcome.records.len(),
                out.display(),
                outcome.config_hash
            );
        }
        Command::CoverageReport { records, out } => {
            let outcome = report::coverage_report(&records, &out)?;
            for p in &outcome.missing {
                eprintln!("missing snapshots: {}", p.display());
            }
            for p in &outcome.written {
                println!("{}", p.display());
            }
        }
        Command::Plot { trajectories, out, format } => {
            let path = plot::plot(&trajectories, &out, format)?;
            println!("{}", path.display());
        }
        Command::SolveQubo { file, one_based, seed, sweeps, restarts, brute_force } => {
            let mut anneal = AnnealConfig { seed, ..AnnealConfig::default() };
            if let Some(s) = sweeps {
                anneal.num_sweeps = s;
            }
            if let Some(r) = restarts {
                anneal.num_restarts = r;
            }
            let sol = solve::solve_file(&file, &SolveOptions { one_based, anneal, brute_force })?;
            print!("{}", sol.render());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
