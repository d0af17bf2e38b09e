use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use log::error;

use nondipole_cli::{compare_runs, config, execute, parse_config, CliError, RunOptions};

#[derive(Parser)]
#[command(name = "nondipole", version, about = "Hydrogen atom in a laser pulse beyond the dipole approximation")]
struct Cli {
    /// Worker threads for the numerical kernels (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Propagate one configuration and write its outputs.
    Run(RunArgs),
    /// Compare the manifests of two runs.
    Compare {
        manifest_a: PathBuf,
        manifest_b: PathBuf,
    },
    /// Parse a configuration and print the resolved parameters.
    ValidateConfig {
        #[arg(long)]
        config: PathBuf,
    },
    /// List every configuration key.
    Keys,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long, default_value = "output")]
    output: PathBuf,
    /// Checkpoint file (default: <output>/checkpoint.bin).
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    /// Continue from the checkpoint instead of the initial state.
    #[arg(long)]
    resume: bool,
    #[arg(long, overrides_with = "no_plot")]
    plot: bool,
    #[arg(long, overrides_with = "plot")]
    no_plot: bool,
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Other(e.to_string()))?;
    }
    match cli.command {
        Command::Run(args) => {
            let cfg = parse_config(&args.config)?;
            let plot = match (args.plot, args.no_plot) {
                (true, _) => Some(true),
                (_, true) => Some(false),
                _ => None,
            };
            let opts = RunOptions {
                output: args.output,
                checkpoint: args.checkpoint,
                resume: args.resume,
                plot,
            };
            let outcome = execute(&cfg, &opts)?;
            println!("run {} complete, outputs in {}", outcome.run_id, opts.output.display());
        }
        Command::Compare { manifest_a, manifest_b } => {
            print!("{}", compare_runs(&manifest_a, &manifest_b)?.render());
        }
        Command::ValidateConfig { config: path } => {
            let cfg = parse_config(&path)?;
            println!("# run_id={}", cfg.run_id());
            for (k, v) in cfg.canonical() {
                println!("{k} = {v}");
            }
        }
        Command::Keys => {
            for (k, d) in config::KEYS {
                println!("{k:<20} {d}");
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match dispatch(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            error!("{e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
