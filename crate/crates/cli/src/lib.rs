//! Driver for the `kbm` binary: argument parsing, configuration merging,
//! experiment orchestration and output persistence.
//!
//! Every run writes its CSV outputs and a `manifest.json` into the output
//! directory. Exit codes: 0 on success, 2 on a certification or validation
//! failure, 1 on an internal error.

pub mod commands;
pub mod config;
pub mod run;
pub mod svg;

use anyhow::Context;
use clap::{Parser, Subcommand};
use config::{
    ConvergeArgs, ConvergeSettings, GapArgs, GapSettings, HypoArgs, HypoSettings, ResolventArgs, ResolventSettings,
    SimulateArgs, SimulateSettings, SpectrumArgs, SpectrumSettings,
};
use kbm_core::KbmError;
use run::Run;
use serde::de::DeserializeOwned;
use serde::Serialize;
use std::fmt;
use std::path::PathBuf;

#[derive(Debug, Parser)]
#[command(
    name = "kbm",
    version,
    about = "Numerical experiments for kinetic Brownian motion on the flat 2-torus"
)]
pub struct Cli {
    /// TOML file with one table per subcommand; flags override it.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(short, long, global = true, default_value = ".")]
    pub out: PathBuf,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Eigenvalues of P_gamma in a window, matched against the base spectrum.
    Spectrum(SpectrumArgs),
    /// Matched Hausdorff distance to the base spectrum over a gamma grid.
    Converge(ConvergeArgs),
    /// Resolvent difference norms and their decay rate in gamma.
    Resolvent(ResolventArgs),
    /// Spectral gap over a gamma grid and the equilibrium remainder.
    Gap(GapArgs),
    /// Empirical constants of the uniform subelliptic estimates.
    Hypo(HypoArgs),
    /// Monte-Carlo paths, ensemble statistics and trajectory panels.
    Simulate(SimulateArgs),
}

/// A certification or validation failure (exit code 2).
#[derive(Debug)]
pub struct Failed(pub String);

impl fmt::Display for Failed {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Failed {}

pub fn exit_code(err: &anyhow::Error) -> u8 {
    if err.is::<Failed>() {
        return 2;
    }
    match err.downcast_ref::<KbmError>() {
        Some(
            KbmError::InvalidParameter(_)
            | KbmError::UnsupportedDimension(_)
            | KbmError::NonFinite
            | KbmError::TruncationCeiling { .. }
            | KbmError::UnconvergedModes { .. }
            | KbmError::TailNotControlled { .. }
            | KbmError::TailNotCertified(_)
            | KbmError::NearSpectrum(_)
            | KbmError::BetaCollision { .. }
            | KbmError::StepBudget { .. },
        ) => 2,
        _ => 1,
    }
}

/// Caps the global rayon pool at `KBM_THREADS` when set.
pub fn init_threads() -> anyhow::Result<()> {
    if let Ok(v) = std::env::var("KBM_THREADS") {
        let n: usize = v
            .trim()
            .parse()
            .with_context(|| format!("KBM_THREADS = {v:?} is not a thread count"))?;
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("worker pool already initialised")?;
    }
    Ok(())
}

/// Runs one subcommand and returns the process exit code.
pub fn execute(cli: Cli) -> u8 {
    let file = match cli.config.as_deref().map(config::load_file).transpose() {
        Ok(f) => f,
        Err(e) => {
            eprintln!("error: {e:#}");
            return 2;
        }
    };
    let file = file.as_ref();
    match &cli.command {
        Command::Spectrum(a) => dispatch::<SpectrumSettings, _>("spectrum", file, a, &cli.out, commands::spectrum),
        Command::Converge(a) => dispatch::<ConvergeSettings, _>("converge", file, a, &cli.out, commands::converge),
        Command::Resolvent(a) => dispatch::<ResolventSettings, _>("resolvent", file, a, &cli.out, commands::resolvent),
        Command::Gap(a) => dispatch::<GapSettings, _>("gap", file, a, &cli.out, commands::gap),
        Command::Hypo(a) => dispatch::<HypoSettings, _>("hypo", file, a, &cli.out, commands::hypo),
        Command::Simulate(a) => dispatch::<SimulateSettings, _>("simulate", file, a, &cli.out, commands::simulate),
    }
}

fn dispatch<S, A>(
    name: &str,
    file: Option<&toml::Table>,
    args: &A,
    out: &std::path::Path,
    body: fn(&S, &mut Run) -> anyhow::Result<()>,
) -> u8
where
    S: Serialize + DeserializeOwned + Default,
    A: Serialize,
{
    let settings: S = match config::resolve(file, name, args) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("error: {e:#}");
            return 2;
        }
    };
    let mut run = match Run::new(name, out, &settings) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e:#}");
            return 1;
        }
    };
    let result = body(&settings, &mut run);
    let code = result.as_ref().map_or_else(exit_code, |_| 0);
    let message = result.as_ref().err().map(|e| format!("{e:#}"));
    if let Err(e) = run.finish(code, message.clone()) {
        eprintln!("error: could not write manifest: {e:#}");
        return 1;
    }
    for (k, v) in &run.summary {
        println!("{k} = {v}");
    }
    if let Some(m) = message {
        eprintln!("error: {m}");
    }
    code
}
