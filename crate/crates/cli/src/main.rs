//! `kssm`: config-driven harness for the motility chemotaxis simulator.

mod commands;
mod config;
mod summary;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use commands::{cmd_constants, cmd_run, cmd_sweep, core_exit_code, EXIT_CONFIG, EXIT_OVERFLOW};
use config::RunConfig;
use kssm_core::diagnostics::Regime;
use kssm_core::scenario::{presets, Scenario};

#[derive(Parser)]
#[command(name = "kssm", version, about = "Keller-Segel signal-dependent-motility simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ScenarioArgs {
    /// Load a TOML run configuration.
    #[arg(long, value_name = "PATH", conflicts_with = "preset")]
    config: Option<PathBuf>,
    /// Use a named preset (see `kssm presets list`).
    #[arg(long, value_name = "NAME")]
    preset: Option<String>,
    /// Output directory; omitted means console output only.
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Compute the constructive constants for a configuration.
    Constants {
        #[command(flatten)]
        scenario: ScenarioArgs,
    },
    /// Run one simulation with diagnostics, bound checks and comparisons.
    Run {
        #[command(flatten)]
        scenario: ScenarioArgs,
        /// Worker threads (runs themselves are single-threaded).
        #[arg(long, default_value_t = 1)]
        threads: usize,
        /// Exit with code 4 when the run classifies as Overflowed.
        #[arg(long)]
        fail_on_overflow: bool,
    },
    /// Run a parameter sweep defined by the config's [sweep] section.
    Sweep {
        #[command(flatten)]
        scenario: ScenarioArgs,
        /// Parallel sweep workers; each run stays single-threaded.
        #[arg(long, default_value_t = 1)]
        threads: usize,
    },
    /// Preset utilities.
    Presets {
        #[command(subcommand)]
        action: PresetsAction,
    },
}

#[derive(Subcommand)]
enum PresetsAction {
    /// List the built-in presets.
    List,
}

fn resolve(args: &ScenarioArgs) -> anyhow::Result<(Scenario<f64>, Option<RunConfig>)> {
    match (&args.config, &args.preset) {
        (Some(path), None) => {
            let cfg = RunConfig::load(path)?;
            let scn = cfg.to_scenario()?;
            Ok((scn, Some(cfg)))
        }
        (None, Some(name)) => {
            let scn = presets::by_name(name)
                .ok_or_else(|| anyhow::anyhow!("unknown preset `{name}`"))?;
            Ok((scn, None))
        }
        _ => anyhow::bail!("exactly one of --config or --preset is required"),
    }
}

fn fail(err: anyhow::Error) -> ExitCode {
    eprintln!("error: {err:#}");
    let code = core_exit_code(&err);
    ExitCode::from(code as u8)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Constants { scenario } => {
            let (scn, _) = match resolve(&scenario) {
                Ok(v) => v,
                Err(e) => return fail(e),
            };
            match cmd_constants(&scn, scenario.out.as_deref()) {
                Ok(()) => ExitCode::SUCCESS,
                Err(e) => fail(e),
            }
        }
        Command::Run {
            scenario,
            threads: _,
            fail_on_overflow,
        } => {
            let (scn, _) = match resolve(&scenario) {
                Ok(v) => v,
                Err(e) => return fail(e),
            };
            match cmd_run(&scn, scenario.out.as_deref()) {
                Ok(outcome) => {
                    if fail_on_overflow && outcome.classification == Regime::Overflowed {
                        eprintln!("overflow classification with --fail-on-overflow");
                        ExitCode::from(EXIT_OVERFLOW as u8)
                    } else {
                        ExitCode::SUCCESS
                    }
                }
                Err(e) => fail(e),
            }
        }
        Command::Sweep { scenario, threads } => {
            let (scn, cfg) = match resolve(&scenario) {
                Ok(v) => v,
                Err(e) => return fail(e),
            };
            let sweep = match cfg.as_ref().and_then(|c| c.sweep.clone()) {
                Some(s) => s,
                None => {
                    eprintln!("error: sweep requires a config file with a [sweep] section");
                    return ExitCode::from(EXIT_CONFIG as u8);
                }
            };
            match cmd_sweep(&scn, &sweep, scenario.out.as_deref(), threads) {
                Ok(()) => ExitCode::SUCCESS,
                Err(e) => fail(e),
            }
        }
        Command::Presets { action } => match action {
            PresetsAction::List => {
                for (name, desc) in presets::catalog() {
                    println!("{name:16} {desc}");
                }
                ExitCode::SUCCESS
            }
        },
    }
}
