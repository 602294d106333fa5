use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use fedshot_cli::commands::{self, Global};
use fedshot_cli::CliError;

#[derive(Parser)]
#[command(
    name = "fedshot",
    version,
    about = "Federated few-shot text classification experiments"
)]
struct Cli {
    /// Experiment config file (JSON).
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Replace the config's seed list (comma-separated integers).
    #[arg(long, global = true, value_name = "SEEDS")]
    seed_override: Option<String>,
    /// Output directory (overrides the config's output_dir).
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Suppress progress output.
    #[arg(long, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Validate dataset files, reporting line-level diagnostics.
    ValidateData { files: Vec<PathBuf> },
    /// Build leakage-filtered train/dev splits for every configured client.
    BuildSplits,
    /// Run experiments: federated training, the single-target baseline, or
    /// the toxicity-API baseline.
    Run {
        #[arg(long, value_enum)]
        mode: RunModeArg,
    },
    /// Emit delta tables and per-client series files from run reports.
    Report { reports: Vec<PathBuf> },
    /// Inter-annotator agreement (kappa and alpha, three- and two-class)
    /// between two annotation files covering the same ids.
    Agreement { file_a: PathBuf, file_b: PathBuf },
    /// Corpus statistics, one row per file.
    Stats { files: Vec<PathBuf> },
    /// Serve the bundled mock toxicity API from a fixture file.
    MockApi {
        /// JSON object mapping text to score.
        #[arg(long)]
        fixture: PathBuf,
        #[arg(long, default_value = "127.0.0.1:0")]
        addr: String,
        /// Speak the Perspective-style request/response shape.
        #[arg(long)]
        perspective: bool,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum RunModeArg {
    Fl,
    Baseline,
    Api,
}

fn parse_seed_override(raw: &Option<String>) -> Result<Option<Vec<u64>>, CliError> {
    let Some(raw) = raw else { return Ok(None) };
    let seeds: Result<Vec<u64>, _> = raw.split(',').map(|s| s.trim().parse::<u64>()).collect();
    match seeds {
        Ok(seeds) if !seeds.is_empty() => Ok(Some(seeds)),
        _ => Err(CliError::config(format!(
            "--seed-override: expected comma-separated integers, got '{raw}'"
        ))),
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    let global = Global {
        config: cli.config,
        seed_override: parse_seed_override(&cli.seed_override)?,
        out: cli.out,
        quiet: cli.quiet,
    };
    match cli.command {
        Command::ValidateData { files } => commands::cmd_validate_data(&global, &files),
        Command::BuildSplits => commands::cmd_build_splits(&global),
        Command::Run { mode } => {
            let mode = match mode {
                RunModeArg::Fl => commands::RunMode::Fl,
                RunModeArg::Baseline => commands::RunMode::Baseline,
                RunModeArg::Api => commands::RunMode::Api,
            };
            commands::cmd_run(&global, mode)
        }
        Command::Report { reports } => commands::cmd_report(&global, &reports),
        Command::Agreement { file_a, file_b } => commands::cmd_agreement(&global, &file_a, &file_b),
        Command::Stats { files } => commands::cmd_stats(&global, &files),
        Command::MockApi {
            fixture,
            addr,
            perspective,
        } => commands::cmd_mock_api(&global, &fixture, &addr, perspective),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
