//! `multiarm`: Bayesian sample sizes and decisions for multi-arm trials.

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use multiarm::Error;

#[derive(Parser)]
#[command(name = "multiarm", version, about = "Sample sizes and decisions for trials comparing k treatments with a control")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// TOML run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Criterion 1 (at least one effect reaches delta*) or 2 (the best arm
    /// does); both when omitted.
    #[arg(long, global = true, value_parser = clap::value_parser!(u8).range(1..=2))]
    criterion: Option<u8>,

    /// Monte Carlo seed, overrides `[mc] seed`.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Output directory, overrides `[output] dir`; default `.`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    #[arg(long, global = true, value_enum, default_value_t = Format::Both)]
    format: Format,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Sample sizes with known response precision.
    DesignKnown,
    /// Sample sizes under a gamma prior on the precision.
    DesignUnknown,
    /// Posterior summaries and the proceed / abandon decision.
    Analyze,
    /// Dunnett design, and the many-to-one test when data are given.
    Dunnett,
    /// Proceed and abandon boundaries for two experimental arms.
    Boundary,
    /// Regenerate the dose-study design tables with a pass column.
    ReproduceTables,
}

#[derive(ValueEnum, Clone, Copy, PartialEq, Eq)]
enum Format {
    Csv,
    Report,
    Both,
}

fn exit_code(e: &Error) -> u8 {
    if e.is_numeric() || matches!(e, Error::Infeasible(_)) {
        3
    } else {
        2
    }
}

fn run(cli: &Cli) -> Result<output::Output, Error> {
    let raw = match (&cli.config, cli.command) {
        (Some(path), _) => config::load(path)?,
        (None, Command::ReproduceTables) => config::parse("")?,
        (None, _) => return Err(Error::InvalidConfig("--config <path> is required for this subcommand".into())),
    };
    let resolved = config::resolve(&raw, cli.seed)?;
    let out = match cli.command {
        Command::DesignKnown => commands::design_known(&resolved, cli.criterion),
        Command::DesignUnknown => commands::design_unknown(&resolved, cli.criterion),
        Command::Analyze => commands::analyze(&resolved),
        Command::Dunnett => commands::dunnett(&resolved),
        Command::Boundary => commands::boundary(&resolved, cli.criterion),
        Command::ReproduceTables => commands::reproduce_tables(&resolved),
    }?;
    let dir = cli
        .out
        .clone()
        .or_else(|| raw.output.as_ref().and_then(|o| o.dir.clone()))
        .unwrap_or_else(|| PathBuf::from("."));
    let (csv, report) = match cli.format {
        Format::Csv => (true, false),
        Format::Report => (false, true),
        Format::Both => (true, true),
    };
    match out.write(&dir, csv, report) {
        Ok(files) => {
            for f in files {
                log::info!("wrote {}", dir.join(f).display());
            }
        }
        Err(e) => return Err(Error::InvalidConfig(format!("cannot write to {}: {e}", dir.display()))),
    }
    if report {
        print!("{}", out.render_report());
    }
    Ok(out)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(_) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
