//! Reproducible experiments on the resonator-coupler-resonator circuit.

pub mod commands;
pub mod config;
pub mod output;

use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};

pub use config::RunConfig;
use output::Writer;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("numerical quality failure: {0}")]
    Numerical(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    /// 1 for configuration and environment problems, 2 for numerical ones.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Io(_) => 1,
            CliError::Numerical(_) => 2,
        }
    }
}

impl From<rqrsim::Error> for CliError {
    fn from(e: rqrsim::Error) -> Self {
        use rqrsim::Error as E;
        match e {
            E::EmptySpace
            | E::InvalidCutoff { .. }
            | E::InvalidModeIndex { .. }
            | E::SpaceMismatch(_)
            | E::DimensionMismatch { .. }
            | E::InvalidParameter(_)
            | E::PermutationTooSmall { .. }
            | E::RankDeficient(_)
            | E::Truncation(_)
            | E::TimeOutOfRange { .. } => CliError::Config(e.to_string()),
            _ => CliError::Numerical(e.to_string()),
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "rqrsim", version, about = "Resonator-coupler-resonator gate experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// TOML run configuration; built-in defaults when absent.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory (overrides `output.dir`).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// RNG seed (overrides `seed`).
    #[arg(long, global = true)]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Effective couplings against coupler frequency.
    ScanCouplings,
    /// Controlled-phase gate of the two resonator qubits.
    CzGate {
        /// Also evaluate under the master equation.
        #[arg(long)]
        lindblad: bool,
        /// Re-optimize the pulse parameters first.
        #[arg(long)]
        optimize: bool,
    },
    /// Cross-Kerr synthesis plan and qudit gate errors.
    KerrSynth,
    /// Phase tables of encoded cross-Kerr gates.
    EncodedDemo,
    /// Numerical spectra against the closed-form results.
    Oracles,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::ScanCouplings => "scan-couplings",
            Command::CzGate { .. } => "cz-gate",
            Command::KerrSynth => "kerr-synth",
            Command::EncodedDemo => "encoded-demo",
            Command::Oracles => "oracles",
        }
    }
}

/// Configuration after command-line overrides.
pub fn resolve(config: Option<&Path>, seed: Option<u64>) -> Result<RunConfig, CliError> {
    let mut cfg = match config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(s) = seed {
        cfg.seed = s;
    }
    Ok(cfg)
}

/// Run one command; returns the files written.
pub fn run(command: Command, cfg: &RunConfig, out: Option<&Path>) -> Result<Vec<PathBuf>, CliError> {
    let dir = out.map(Path::to_path_buf).unwrap_or_else(|| cfg.output.dir.clone());
    let mut w = Writer::new(&dir, command.name(), &cfg.hash(), cfg.seed);
    let result = match command {
        Command::ScanCouplings => commands::scan(cfg, &mut w).map(|_| ()),
        Command::CzGate { lindblad, optimize } => commands::cz_gate(cfg, &mut w, lindblad, optimize).map(|_| ()),
        Command::KerrSynth => commands::kerr_synth(cfg, &mut w).map(|_| ()),
        Command::EncodedDemo => commands::encoded_demo(cfg, &mut w).map(|_| ()),
        Command::Oracles => commands::oracles(cfg, &mut w).map(|_| ()),
    };
    result.map(|_| w.written().to_vec())
}
