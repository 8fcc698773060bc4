//! `sfwm`: joint spectra, purity scans, HOM dips and CAR curves from a JSON
//! scenario config.

mod commands;
mod config;
mod error;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::commands::Run;
use crate::config::{locate, Mode};
use crate::error::CliError;

#[derive(Parser, Debug)]
#[command(name = "sfwm", version, about = "Four-wave-mixing photon-pair source simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Scenario config (JSON).
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Output directory.
    #[arg(long, global = true, env = "SFWM_OUT_DIR", default_value = ".")]
    out: PathBuf,

    /// RNG seed for Monte Carlo runs; overrides `mc.seed`.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Phase-matching model; overrides `phase_matching.mode`.
    #[arg(long, global = true, value_enum)]
    mode: Option<Mode>,

    /// Grid points per axis; overrides `grid.n_points`.
    #[arg(long, global = true)]
    grid: Option<usize>,
}

#[derive(Subcommand, Debug, Clone, Copy)]
enum Command {
    /// Joint spectral intensity grid with Gaussian coefficients and purity.
    Jsi,
    /// Heralded purity against pump pulse width.
    PurityScan,
    /// Two-source HOM dip and visibilities.
    Hom,
    /// Analytic CAR against pump power.
    Car,
    /// Event-level Monte Carlo (CAR or HOM, per `mc.kind`).
    Mc,
}

fn run(cli: &Cli) -> Result<(), CliError> {
    let path = cli.config.as_ref().ok_or_else(|| config::ConfigError {
        path: None,
        line: None,
        message: "--config <path> is required".into(),
    })?;
    let text = std::fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.clone(),
        source,
    })?;
    let mut cfg = config::parse(&text)?;
    if let Some(mode) = cli.mode {
        cfg.phase_matching.mode = mode;
    }
    if let Some(n) = cli.grid {
        cfg.grid.n_points = n;
    }
    if let Some(seed) = cli.seed {
        cfg.mc.seed = Some(seed);
    }
    let seed = cfg.mc.seed;
    if matches!(cli.command, Command::Mc) && seed.is_none() {
        return Err(config::ConfigError {
            path: Some("mc.seed".into()),
            line: None,
            message: "a seed is required for mc; pass --seed or set mc.seed".into(),
        }
        .into());
    }

    let resolved = config::resolve(&cfg, matches!(cli.command, Command::Car | Command::Mc)).map_err(|e| match e {
        CliError::Config(mut c) => {
            c.line = c.line.or_else(|| c.path.as_deref().and_then(|p| locate(&text, p)));
            CliError::Config(c)
        }
        other => other,
    })?;
    let canonical = serde_json::to_vec(&cfg).expect("config serializes");
    let run = Run {
        cfg: &cfg,
        text: &text,
        resolved,
        out: cli.out.clone(),
        hash: output::content_hash(&canonical),
    };
    match cli.command {
        Command::Jsi => run.jsi(),
        Command::PurityScan => run.purity_scan(),
        Command::Hom => run.hom(),
        Command::Car => run.car(),
        Command::Mc => run.mc(seed.expect("checked above")),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
