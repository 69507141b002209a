use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use kinrl::output::config_hash;
use kinrl::settings::{DiscriminationSettings, DispersalSettings, SandboxSettings};
use kinrl::{commands, load, split_overrides, RunError, Settings, OUT_DIR_ENV};

/// Independent Q-learners rewarded by genetic relatedness.
///
/// Config keys can be overridden after the subcommand with `--key=value`,
/// e.g. `--inclusive=false`, `--seeds=1,2,3` or `--learner.alpha=0.5`. A key
/// may be given by its last path segment when that is unambiguous.
#[derive(Parser, Debug)]
#[command(name = "kinrl", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct RunArgs {
    /// TOML config file; built-in defaults are used when omitted.
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(short, long, env = OUT_DIR_ENV, default_value = "results")]
    out: PathBuf,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Opponent discrimination sweep over c/b.
    Discrimination(RunArgs),
    /// Limited dispersal sweep over eta, b/c and reward variant.
    Dispersal(RunArgs),
    /// Birth-death sandbox trace with population rewards.
    Sandbox(RunArgs),
    /// Check a config without running anything.
    Validate {
        #[arg(value_enum)]
        experiment: Experiment,
        config: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Experiment {
    Discrimination,
    Dispersal,
    Sandbox,
}

fn validate<C: Settings>(
    path: Option<&Path>,
    overrides: &[String],
) -> Result<Vec<String>, RunError> {
    let loaded = load::<C>(path, overrides)?;
    Ok(vec![format!(
        "config OK (sha256 {})",
        config_hash(&loaded.config)
    )])
}

fn run(cli: Cli, overrides: &[String]) -> Result<Vec<String>, RunError> {
    let report = match cli.command {
        Command::Discrimination(a) => commands::discrimination(
            &load::<DiscriminationSettings>(a.config.as_deref(), overrides)?,
            &a.out,
        )?,
        Command::Dispersal(a) => commands::dispersal(
            &load::<DispersalSettings>(a.config.as_deref(), overrides)?,
            &a.out,
        )?,
        Command::Sandbox(a) => commands::sandbox(
            &load::<SandboxSettings>(a.config.as_deref(), overrides)?,
            &a.out,
        )?,
        Command::Validate { experiment, config } => {
            let path = config.as_deref();
            return match experiment {
                Experiment::Discrimination => validate::<DiscriminationSettings>(path, overrides),
                Experiment::Dispersal => validate::<DispersalSettings>(path, overrides),
                Experiment::Sandbox => validate::<SandboxSettings>(path, overrides),
            };
        }
    };
    let mut lines: Vec<String> = report
        .files
        .iter()
        .map(|f| format!("wrote {}", f.display()))
        .collect();
    lines.extend(report.notes);
    Ok(lines)
}

fn main() -> ExitCode {
    let (args, overrides) = split_overrides(std::env::args());
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli, &overrides) {
        Ok(lines) => {
            for line in lines {
                println!("{line}");
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
