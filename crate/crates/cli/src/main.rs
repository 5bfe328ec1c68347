//! `tunnel`: runs one named experiment and writes its artifact under
//! `$TUNNEL_OUTPUT_DIR`.
//!
//! ```text
//! tunnel closed-decay --config run.cfg --bath.gamma 0.02 --grid.n=512
//! ```
//!
//! Exit status: 0 on success, 2 when the parameters are outside the physical
//! domain, 1 for syntax and I/O problems.

mod config;
mod error;
mod experiments;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::{RawConfig, RunConfig};
use error::CliError;
use experiments::Experiment;

#[derive(Parser)]
#[command(name = "tunnel", version, about = "Tunneling and activated-escape experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Rate and escape-temperature table from two measured energy scales.
    AppendixD(RunArgs),
    /// Closed-system persistence, analytic against the energy grid.
    ClosedDecay(RunArgs),
    /// Kernel identity residuals along a grid refinement.
    SpectralChecks(RunArgs),
    /// Local open-system evolution of the false vacuum.
    EvolveOpen(RunArgs),
    /// Escape rates over a range of barrier-to-noise ratios.
    KramersSweep(RunArgs),
    /// Relaxation, decoherence and tunneling times.
    Timescales(RunArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Config file of `key = value` lines.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides as `--section.key value` or `--section.key=value`.
    #[arg(trailing_var_arg = true, allow_hyphen_values = true, value_name = "--KEY VALUE")]
    overrides: Vec<String>,
}

impl Command {
    fn split(self) -> (Experiment, RunArgs) {
        match self {
            Self::AppendixD(a) => (Experiment::AppendixD, a),
            Self::ClosedDecay(a) => (Experiment::ClosedDecay, a),
            Self::SpectralChecks(a) => (Experiment::SpectralChecks, a),
            Self::EvolveOpen(a) => (Experiment::EvolveOpen, a),
            Self::KramersSweep(a) => (Experiment::KramersSweep, a),
            Self::Timescales(a) => (Experiment::Timescales, a),
        }
    }
}

impl RunArgs {
    /// Once the first override is seen clap stops looking for `--config`,
    /// so pick it out of the trailing pairs as well.
    fn take_late_config(&mut self) -> Result<(), CliError> {
        let mut rest = Vec::with_capacity(self.overrides.len());
        let mut it = std::mem::take(&mut self.overrides).into_iter();
        while let Some(arg) = it.next() {
            let path = if arg == "--config" {
                Some(it.next().ok_or_else(|| CliError::Usage("missing value for `--config`".into()))?)
            } else {
                arg.strip_prefix("--config=").map(str::to_string)
            };
            match path {
                Some(p) if self.config.is_some() => {
                    return Err(CliError::Usage(format!("`--config` given twice (second: {p})")))
                }
                Some(p) => self.config = Some(PathBuf::from(p)),
                None => rest.push(arg),
            }
        }
        self.overrides = rest;
        Ok(())
    }
}

fn execute(exp: Experiment, mut args: RunArgs) -> Result<(), CliError> {
    args.take_late_config()?;
    let mut raw = match &args.config {
        Some(path) => RawConfig::load(path)?,
        None => RawConfig::default(),
    };
    raw.apply_overrides(&args.overrides)?;
    let cfg = RunConfig::from_raw(&raw)?;
    let artifact = experiments::run(exp, &cfg)?;
    let name = cfg.run.output.clone().unwrap_or_else(|| exp.default_output());
    let path = output::write_artifact(&output::output_root(), &name, &artifact.contents)?;
    if let Some(summary) = artifact.summary {
        print!("{summary}");
    }
    println!("wrote {}", path.display());
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    let (exp, args) = cli.command.split();
    match execute(exp, args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("tunnel {}: {e}", exp.name());
            ExitCode::from(e.exit_code())
        }
    }
}
