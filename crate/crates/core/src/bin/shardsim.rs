use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};
use shardsim::config::parse_config;
use shardsim::report::{cmd_compare, cmd_plotdata, cmd_run, Report};
use shardsim::strategies::StrategyKind;
use shardsim::Error;

/// Sharded key-value store simulator.
#[derive(Parser)]
#[command(name = "shardsim", version)]
struct Cli {
    /// Suppress everything but errors.
    #[arg(long, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate one strategy under one seed.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        /// Report file; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compare strategies across matched seeds.
    Compare {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, value_delimiter = ',', default_value = "range,hash,consistent,adaptive")]
        strategies: Vec<StrategyKind>,
        /// Comma-separated; defaults to the config's seed, else a random one.
        #[arg(long, value_delimiter = ',')]
        seeds: Vec<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Flatten a report's per-bucket series into CSV rows.
    Plotdata {
        report: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

fn emit(report: &Report, out: Option<&PathBuf>) -> shardsim::Result<()> {
    match out {
        Some(p) => report.write(p),
        None => {
            print!("{}", report.to_json());
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let level = if cli.quiet { "error" } else { "warn" };
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("SHARDSIM_LOG", level)).init();

    let started = Instant::now();
    let result = match &cli.command {
        Command::Run { config, seed, out } => parse_config(config).and_then(|cfg| {
            let report = cmd_run(&cfg, *seed)?;
            emit(&report, out.as_ref())?;
            if !cli.quiet {
                let r = &report.runs[0];
                eprintln!(
                    "{} seed {}: {}/{} ok, performance {:.3}, fault tolerance {:.3}, adaptability {:.3}",
                    r.strategy,
                    r.seed,
                    r.requests_ok,
                    r.requests,
                    r.performance.unwrap_or(0.0),
                    r.fault_tolerance.score,
                    r.adaptability
                );
            }
            Ok(())
        }),
        Command::Compare {
            config,
            strategies,
            seeds,
            out,
        } => parse_config(config).and_then(|cfg| {
            let seeds = if seeds.is_empty() {
                vec![cfg.seed.unwrap_or_else(shardsim::report::entropy_seed)]
            } else {
                seeds.clone()
            };
            let report = cmd_compare(&cfg, strategies, &seeds)?;
            emit(&report, out.as_ref())?;
            if !cli.quiet {
                if let Some(t) = report.table() {
                    eprint!("{t}");
                }
            }
            Ok(())
        }),
        Command::Plotdata { report, out } => cmd_plotdata(report, out).map(|rows| {
            if !cli.quiet {
                eprintln!("{rows} rows written to {}", out.display());
            }
        }),
    };
    if !cli.quiet {
        eprintln!("wall time {:.2} s", started.elapsed().as_secs_f64());
    }
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn exit_code(e: &Error) -> u8 {
    if e.is_config_error() {
        1
    } else {
        2
    }
}
