use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use radis_core::experiment::{emulate, format_summary, load_config, oracle, run_experiment, SeedRange};
use radis_core::Error;

#[derive(Parser)]
#[command(name = "radis", version, about = "Regression-based adaptive deep importance sampling experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every algorithm cell of a config for every seed.
    Run {
        config: PathBuf,
        /// Override the seed range: `N` or `A..B`.
        #[arg(long)]
        seeds: Option<String>,
        /// Output directory (default: the config's `output`, else `out/<name>`).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Worker threads (default: all cores).
        #[arg(long)]
        jobs: Option<usize>,
    },
    /// Rebuild an emulator from saved nodes and dump it on a grid.
    Emulate {
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print the reference evidence and moments of a benchmark target as JSON.
    Oracle {
        /// `banana` or `mixture`.
        target: String,
        /// Grid points per axis for quadrature.
        #[arg(long, default_value_t = 2000)]
        grid: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::InvalidConfig(_) | Error::InvalidArgument(_) => ExitCode::from(2),
                _ => ExitCode::FAILURE,
            }
        }
    }
}

fn execute(command: Command) -> radis_core::Result<ExitCode> {
    match command {
        Command::Run { config, seeds, out, jobs } => {
            let (mut cfg, cells) = load_config(&config)?;
            if let Some(s) = seeds {
                cfg.seeds = SeedRange::parse(&s)?;
            }
            if jobs == Some(0) {
                return Err(Error::InvalidArgument("--jobs must be at least 1".into()));
            }
            let output = out
                .or_else(|| cfg.output.clone())
                .unwrap_or_else(|| PathBuf::from("out").join(&cfg.name));
            let summary = run_experiment(&cfg, &cells, &output, jobs)?;
            print!("{}", format_summary(&summary.rows));
            println!(
                "{} runs over {} cells, {} failed; results in {}",
                summary.runs,
                cells.len(),
                summary.failures,
                summary.output.display()
            );
        }
        Command::Emulate { config, out } => {
            let s = emulate(&config, out.as_deref())?;
            println!("wrote {} grid points to {}", s.points, s.output.display());
            if let Some(l2) = s.l2_distance {
                println!("grid L2 distance to target: {l2:.6e}");
            }
        }
        Command::Oracle { target, grid, out } => {
            if grid == 0 {
                return Err(Error::InvalidArgument("--grid must be at least 1".into()));
            }
            let report = oracle(&target, grid)?;
            let text = serde_json::to_string_pretty(&report)? + "\n";
            match out {
                Some(p) => std::fs::write(p, text)?,
                None => print!("{text}"),
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}
