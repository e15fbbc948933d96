//! `nsfx`: experiment runner for the noisy-softmax training library.
//!
//! Subcommands: `train`, `noise-compare`, `saturation-study`, `gradcheck`.
//! Exit codes: 0 success, 1 config or validation error (or a failed
//! gradient check), 2 training divergence, 3 I/O or file-format error.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use nsfx_cli::{commands, config::ExperimentConfig};
use nsfx_core::losses::NoiseVariant;

#[derive(Parser)]
#[command(name = "nsfx", version, about = "Noisy-softmax experiment runner")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Only log errors.
    #[arg(long, global = true)]
    quiet: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Train one model and write metrics.csv, summary.json, params.bin.
    Train(RunArgs),
    /// Sweep variants x alpha^2 with paired seeds; write comparison.csv.
    NoiseCompare(RunArgs),
    /// Train each variant with paired seeds; write saturation.csv.
    SaturationStudy(RunArgs),
    /// Verify analytic gradients against central finite differences.
    Gradcheck(GradcheckArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Experiment config file.
    #[arg(long)]
    config: PathBuf,
    /// Override train.seed from the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Override output.dir from the config.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct GradcheckArgs {
    /// Comma-separated noise variants to check.
    #[arg(long, default_value = "none,annealed,normal,negative,free,amplitude")]
    variants: String,
    /// Number of random configurations.
    #[arg(long, default_value_t = 100)]
    configs: usize,
    /// Comma-separated alpha^2 values.
    #[arg(long = "alpha-squared", default_value = "0,0.05,0.1,0.5,1")]
    alpha_squared: String,
    /// Maximum allowed block-relative error.
    #[arg(long, default_value_t = 1e-5)]
    tolerance: f64,
    /// Base seed for configuration sampling.
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // help/version print and exit cleanly; usage errors are config
            // errors (exit 1)
            if e.use_stderr() {
                eprintln!("{e}");
                return ExitCode::from(1);
            }
            print!("{e}");
            return ExitCode::SUCCESS;
        }
    };

    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(
        if cli.quiet { "error" } else { "info" },
    ))
    .init();

    match run(cli) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(classify(&err))
        }
    }
}

fn run(cli: Cli) -> anyhow::Result<ExitCode> {
    match cli.command {
        Command::Train(args) => {
            let cfg = ExperimentConfig::load(&args.config, args.seed, args.out)?;
            commands::train_cmd::run(&cfg)?;
            Ok(ExitCode::SUCCESS)
        }
        Command::NoiseCompare(args) => {
            let cfg = ExperimentConfig::load(&args.config, args.seed, args.out)?;
            commands::noise_compare::run(&cfg)?;
            Ok(ExitCode::SUCCESS)
        }
        Command::SaturationStudy(args) => {
            let cfg = ExperimentConfig::load(&args.config, args.seed, args.out)?;
            commands::saturation::run(&cfg)?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Gradcheck(args) => {
            let variants = args
                .variants
                .split(',')
                .map(str::trim)
                .filter(|s| !s.is_empty())
                .map(NoiseVariant::parse)
                .collect::<nsfx_core::Result<Vec<_>>>()?;
            let alpha_squared: Vec<f64> = args
                .alpha_squared
                .split(',')
                .map(str::trim)
                .filter(|s| !s.is_empty())
                .map(|s| {
                    s.parse::<f64>()
                        .map_err(|e| anyhow::anyhow!("--alpha-squared `{s}`: {e}"))
                })
                .collect::<anyhow::Result<_>>()?;
            let opts = commands::gradcheck_cmd::GradcheckOptions {
                variants,
                configs: args.configs,
                alpha_squared,
                tolerance: args.tolerance,
                seed: args.seed,
                quiet: cli.quiet,
            };
            let passed = commands::gradcheck_cmd::run(&opts)?;
            Ok(if passed {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            })
        }
    }
}

/// Exit 2 for divergence, 3 for I/O and file-format problems, 1 otherwise.
fn classify(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if let Some(core) = cause.downcast_ref::<nsfx_core::Error>() {
            return match core {
                nsfx_core::Error::Diverged { .. } => 2,
                nsfx_core::Error::Io(_) | nsfx_core::Error::Format { .. } => 3,
                _ => 1,
            };
        }
        if cause.downcast_ref::<std::io::Error>().is_some() {
            return 3;
        }
    }
    1
}
