mod commands;
mod run;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Parser, Subcommand};

use commands::{exterior, fowler, glue, interior, linop, modes, verify};

/// Fowler profiles, mode solvers and end-to-end gluing for the critical
/// coupled system on the round sphere.
#[derive(Debug, Parser)]
#[command(name = "yglue", version)]
struct Cli {
    /// JSON model configuration; built-in defaults when absent.
    #[arg(long, global = true, env = run::CONFIG_ENV)]
    config: Option<PathBuf>,
    /// Directory for artifacts and `manifest.json`.
    #[arg(long, global = true, default_value = ".")]
    out: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Integrates the Fowler ODE, or tabulates its period.
    Fowler(fowler::FowlerArgs),
    #[command(subcommand)]
    Modes(modes::ModesCommand),
    #[command(subcommand)]
    Linop(linop::LinopCommand),
    #[command(subcommand)]
    Interior(interior::InteriorCommand),
    #[command(subcommand)]
    Exterior(exterior::ExteriorCommand),
    /// Matches interior and exterior solutions across `|x| = ε^s`.
    Glue(glue::GlueArgs),
    /// Runs the twelve acceptance checks.
    Verify(verify::VerifyArgs),
    /// Prints the default configuration as JSON.
    Config,
}

fn dispatch(cli: &Cli) -> Result<()> {
    let (config, out) = (cli.config.as_deref(), cli.out.as_path());
    match &cli.command {
        Command::Fowler(args) => fowler::run(args, config, out),
        Command::Modes(cmd) => modes::run(cmd, config, out),
        Command::Linop(cmd) => linop::run(cmd, config, out),
        Command::Interior(cmd) => interior::run(cmd, config, out),
        Command::Exterior(cmd) => exterior::run(cmd, config, out),
        Command::Glue(args) => glue::run(args, config, out),
        Command::Verify(args) => verify::run(args, config, out),
        Command::Config => {
            let cfg = run::load_config(config)?;
            print!("{}", String::from_utf8(run::json_bytes(&cfg)?)?);
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
