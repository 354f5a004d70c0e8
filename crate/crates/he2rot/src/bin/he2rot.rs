//! Thin command-line front end; all logic lives in the library.
//!
//! Exit codes: 0 success, 2 validation error, 3 parse error,
//! 4 fit non-convergence (the report is still written).

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use he2rot::cli::{
    cmd_fit, cmd_simulate_kick, cmd_spectrum, cmd_synthesize, cmd_validate, Recipe, RunContext,
};
use he2rot::config::RunConfig;
use he2rot::Error;

#[derive(Parser)]
#[command(name = "he2rot", version, about = "He2* rotational coherence toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Run configuration (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Output directory (default: the config's output.dir).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Seed override for all stochastic behavior.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Kick an incoherent ensemble at each energy; emit populations and coherences.
    SimulateKick {
        #[command(flatten)]
        common: Common,
        /// Energy list override, μJ (comma-separated).
        #[arg(long, value_delimiter = ',')]
        energies: Option<Vec<f64>>,
    },
    /// Synthesize the LD trace and its spectrum from the config.
    Synthesize {
        #[command(flatten)]
        common: Common,
    },
    /// Fourier-analyze an ingested trace CSV.
    Spectrum {
        #[command(flatten)]
        common: Common,
        /// Trace CSV (`t_ps,ld`).
        #[arg(long)]
        data: PathBuf,
    },
    /// Run one figure-level fit recipe.
    Fit {
        /// One of: fig1b-spectrum, fig2a-ratio, fig2b-beat, fig3-temperature,
        /// figS2b-bimolecular.
        recipe: String,
        #[command(flatten)]
        common: Common,
        /// Measured data CSV; synthetic data are generated when omitted.
        #[arg(long)]
        data: Option<PathBuf>,
    },
    /// Check config, bath table and basis invariants.
    Validate {
        #[command(flatten)]
        common: Common,
    },
}

fn exit_code_for(err: &Error) -> u8 {
    match err {
        Error::CsvParse { .. } => 3,
        _ => 2,
    }
}

fn run() -> Result<u8, Error> {
    let cli = Cli::parse();
    match cli.command {
        Command::SimulateKick { common, energies } => {
            let loaded = RunConfig::load(&common.config)?;
            let ctx = RunContext::new(&loaded, common.out, common.seed);
            let files = cmd_simulate_kick(&loaded, &ctx, energies)?;
            for f in files {
                println!("wrote {}", f.display());
            }
            Ok(0)
        }
        Command::Synthesize { common } => {
            let loaded = RunConfig::load(&common.config)?;
            let ctx = RunContext::new(&loaded, common.out, common.seed);
            for f in cmd_synthesize(&loaded, &ctx)? {
                println!("wrote {}", f.display());
            }
            Ok(0)
        }
        Command::Spectrum { common, data } => {
            let loaded = RunConfig::load(&common.config)?;
            let ctx = RunContext::new(&loaded, common.out, common.seed);
            for f in cmd_spectrum(&loaded, &ctx, &data)? {
                println!("wrote {}", f.display());
            }
            Ok(0)
        }
        Command::Fit {
            recipe,
            common,
            data,
        } => {
            let recipe: Recipe = recipe.parse()?;
            let loaded = RunConfig::load(&common.config)?;
            let ctx = RunContext::new(&loaded, common.out, common.seed);
            let outcome = cmd_fit(&loaded, &ctx, recipe, data.as_deref())?;
            for f in &outcome.files {
                println!("wrote {}", f.display());
            }
            for (k, v) in &outcome.entries {
                println!("{k} = {v}");
            }
            Ok(if outcome.converged { 0 } else { 4 })
        }
        Command::Validate { common } => {
            let loaded = RunConfig::load(&common.config)?;
            let report = cmd_validate(&loaded)?;
            for c in &report.checks {
                println!(
                    "{} {}: {}",
                    if c.passed { "PASS" } else { "FAIL" },
                    c.name,
                    c.detail
                );
            }
            Ok(if report.passed() { 0 } else { 2 })
        }
    }
}

fn main() -> ExitCode {
    match run() {
        Ok(code) => ExitCode::from(code),
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(exit_code_for(&err))
        }
    }
}
