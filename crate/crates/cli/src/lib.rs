//! Command-line front end for the `resonance` binary.

pub mod commands;
pub mod config;
pub mod output;

use std::path::PathBuf;

use clap::{Parser, Subcommand};
use resonance_core::Error;

use crate::config::RunConfig;

#[derive(Debug, Parser)]
#[command(name = "resonance", version, about = "Weighted resolvent norms and resonance-free region certificates")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// JSON run configuration.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Seed for `selftest`.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Spot values of I_k(z) and K_k(z).
    Bessel,
    /// Mode Green-kernel table.
    Kernel,
    /// Critical-line norm scan and fitted exponential constant.
    NormScan,
    /// Resonance-free band certificate.
    Certify,
    /// Huygens, Laplace-transform and decay checks on hyperbolic 3-space.
    WaveCheck,
    /// Admissibility report for a warped metric family.
    MetricCheck,
    /// Randomized property checks.
    Selftest,
}

/// Process exit status: 0 success, 1 input or runtime error, 2 certificate refused.
pub fn exit_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<Error>() {
        Some(Error::EvidenceFailure { .. }) => 2,
        _ => 1,
    }
}

pub fn resolve_config(cli: &Cli) -> anyhow::Result<RunConfig> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::from_path(path)?,
        None => RunConfig::default(),
    };
    if let Some(out) = &cli.out {
        cfg.out = out.clone();
    }
    if let Some(t) = cli.threads {
        cfg.threads = t;
    }
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    cfg.threads = cfg.threads.max(1);
    Ok(cfg)
}

pub fn run(cli: &Cli) -> anyhow::Result<()> {
    let cfg = resolve_config(cli)?;
    let out = cfg.out.clone();
    match cli.command {
        Command::Bessel => commands::bessel(&cfg, &out),
        Command::Kernel => commands::kernel(&cfg, &out),
        Command::NormScan => commands::norm_scan(&cfg, &out).map(|_| ()),
        Command::Certify => commands::certify(&cfg, &out),
        Command::WaveCheck => commands::wave_check(&cfg, &out),
        Command::MetricCheck => commands::metric_check(&cfg, &out),
        Command::Selftest => commands::selftest(&cfg, &out),
    }
}
