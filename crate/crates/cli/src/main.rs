use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use seqhom_cli::config::parse_dims;
use seqhom_cli::{check_threads, parse_config, run, run_bench, run_solve, run_spectral, CliError, Mode, RunConfig};
use seqhom_core::saddle::PreconditionerVariant;

#[derive(Parser)]
#[command(name = "seqhom", version, about = "Sequential homotopy solver for bound-constrained elliptic control")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the control problem described by a config file.
    Solve {
        #[arg(long)]
        config: PathBuf,
        /// Overrides `output` from the config.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Check preconditioned spectra of random double saddle-point systems.
    Spectral {
        #[arg(long, default_value_t = 200)]
        seeds: usize,
        #[arg(long, default_value = "40,25,15", value_parser = parse_dims)]
        dims: (usize, usize, usize),
        #[arg(long, default_value_t = 0)]
        first_seed: u64,
        #[arg(long, default_value_t = 1e-6)]
        slack: f64,
        #[arg(long, default_value = "out")]
        output: PathBuf,
    },
    /// Solve once per preconditioner variant and tabulate the runs.
    Bench {
        #[arg(long)]
        config: PathBuf,
        /// Comma-separated; defaults to `bench_variants` from the config.
        #[arg(long, value_delimiter = ',', value_parser = parse_variant)]
        variants: Vec<PreconditionerVariant>,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Run whatever `mode` in the config file selects.
    Run {
        #[arg(long)]
        config: PathBuf,
    },
}

fn parse_variant(s: &str) -> Result<PreconditionerVariant, String> {
    s.parse().map_err(|e: seqhom_core::Error| e.to_string())
}

fn load(path: &Path, output: Option<PathBuf>) -> Result<RunConfig, CliError> {
    let mut cfg = parse_config(path)?;
    if let Some(o) = output {
        cfg.output = o;
    }
    Ok(cfg)
}

fn execute(cmd: Command) -> Result<bool, CliError> {
    check_threads(std::env::var("SEQHOM_THREADS").ok().as_deref())?;
    match cmd {
        Command::Solve { config, output } => {
            let cfg = load(&config, output)?;
            let r = run_solve(&cfg)?;
            println!(
                "converged={} outer={} trials={} krylov={} kkt={:.3e} -> {}",
                r.converged,
                r.outer_iterations,
                r.trials,
                r.total_krylov_iterations,
                r.kkt_residual,
                cfg.output.display()
            );
            Ok(r.converged)
        }
        Command::Spectral {
            seeds,
            dims,
            first_seed,
            slack,
            output,
        } => {
            let mut cfg = RunConfig {
                mode: Mode::Spectral,
                seed: first_seed,
                output,
                ..RunConfig::default()
            };
            cfg.spectral.seeds = seeds;
            cfg.spectral.dims = dims;
            cfg.spectral.slack = slack;
            let r = run_spectral(&cfg)?;
            println!(
                "trials={} violating={} gmres_failures={} -> {}",
                r.trials,
                r.violations,
                r.gmres_failures,
                cfg.output.join("spectral.csv").display()
            );
            Ok(r.passed())
        }
        Command::Bench {
            config,
            variants,
            output,
        } => {
            let cfg = load(&config, output)?;
            let variants = if variants.is_empty() {
                cfg.bench_variants.clone()
            } else {
                variants
            };
            let ok = run_bench(&cfg, &variants)?;
            println!("{}", cfg.output.join("bench.csv").display());
            Ok(ok)
        }
        Command::Run { config } => run(&load(&config, None)?),
    }
}

fn main() -> ExitCode {
    // usage errors are config errors; 2 is reserved for non-convergence
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 3 } else { 0 });
        }
    };
    match execute(cli.command) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e) => {
            eprintln!("seqhom: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
