//! Thin command-line wrapper over the library's analysis pipelines.

use clap::{Parser, Subcommand};
use std::path::PathBuf;
use wavestab::cli::{cmd_analyze, cmd_beta_trace, cmd_evans_scan, cmd_wave, RunConfig, SystemConfig};

#[derive(Parser)]
#[command(
    name = "wavestab",
    about = "Evans-function and Maslov-index stability diagnostics for activator-inhibitor traveling waves",
    version
)]
struct Args {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args, Clone)]
struct CommonFlags {
    /// Path to the JSON run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Output directory override.
    #[arg(long)]
    out: Option<PathBuf>,
    /// System preset override ("fhn").
    #[arg(long)]
    preset: Option<String>,
    /// FHN threshold override.
    #[arg(long)]
    a: Option<f64>,
    /// FHN timescale override.
    #[arg(long)]
    eps: Option<f64>,
    /// FHN recovery slope override.
    #[arg(long)]
    gamma: Option<f64>,
    /// Left end of the Evans scan window.
    #[arg(long)]
    lambda_min: Option<f64>,
    /// Right end of the Evans scan window.
    #[arg(long)]
    lambda_max: Option<f64>,
    /// Number of Evans scan samples.
    #[arg(long)]
    lambda_steps: Option<usize>,
    /// Reference-plane pull-back point.
    #[arg(long)]
    tau: Option<f64>,
    /// Test hook: flip the sign of the Lazutkin-Treschev invariant.
    #[arg(long)]
    debug_flip_lt: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Full pipeline: wave, Evans scan, Maslov index, parity check.
    Analyze(CommonFlags),
    /// Evans function scan only.
    EvansScan(CommonFlags),
    /// Detection-function trace only.
    BetaTrace(CommonFlags),
    /// Wave acquisition only.
    Wave(CommonFlags),
}

fn apply_overrides(mut cfg: RunConfig, flags: &CommonFlags) -> RunConfig {
    if let Some(out) = &flags.out {
        cfg.output.directory = out.clone();
    }
    if let Some(preset) = &flags.preset {
        if preset == "fhn" && !matches!(cfg.system, SystemConfig::Fhn { .. }) {
            cfg.system = SystemConfig::Fhn {
                a: 0.25,
                eps: 0.002,
                gamma: 0.0,
            };
        }
    }
    if let SystemConfig::Fhn { a, eps, gamma } = &mut cfg.system {
        if let Some(x) = flags.a {
            *a = x;
        }
        if let Some(x) = flags.eps {
            *eps = x;
        }
        if let Some(x) = flags.gamma {
            *gamma = x;
        }
    }
    if let Some(x) = flags.lambda_min {
        cfg.analysis.lambda_min = x;
    }
    if let Some(x) = flags.lambda_max {
        cfg.analysis.lambda_max = x;
    }
    if let Some(x) = flags.lambda_steps {
        cfg.analysis.lambda_steps = x;
    }
    if let Some(x) = flags.tau {
        cfg.analysis.tau = Some(x);
    }
    if flags.debug_flip_lt {
        cfg.debug_flip_lt = true;
    }
    cfg
}

fn load(flags: &CommonFlags) -> Result<RunConfig, i32> {
    match RunConfig::from_path(&flags.config) {
        Ok(cfg) => {
            let cfg = apply_overrides(cfg, flags);
            if let Err(e) = cfg.validate() {
                eprintln!("error: {e}");
                return Err(wavestab::cli::EXIT_ERROR);
            }
            Ok(cfg)
        }
        Err(e) => {
            eprintln!("error: {e}");
            Err(wavestab::cli::EXIT_ERROR)
        }
    }
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let args = Args::parse();
    let code = match &args.command {
        Command::Analyze(f) => load(f).map(|cfg| cmd_analyze(&cfg)),
        Command::EvansScan(f) => load(f).map(|cfg| cmd_evans_scan(&cfg)),
        Command::BetaTrace(f) => load(f).map(|cfg| cmd_beta_trace(&cfg)),
        Command::Wave(f) => load(f).map(|cfg| cmd_wave(&cfg)),
    };
    std::process::exit(match code {
        Ok(c) => c,
        Err(c) => c,
    });
}
