mod commands;
mod config;
mod failure;
mod output;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use penumbra::montecarlo::BenchmarkConfig;

use config::{Algorithm, CrbConfig, ReconstructConfig, SimulateConfig};
use failure::Failure;
use output::{OutDir, RunInfo};

/// Corner-camera simulation, bounds and reconstruction.
#[derive(Parser)]
#[command(name = "penumbra", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// TOML run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the seed in the configuration.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory, created if missing.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Reconstruction algorithm; defaults by channel count.
    #[arg(long, global = true, value_enum)]
    algorithm: Option<Algorithm>,
    /// Worker threads for the data-parallel kernels.
    #[arg(long, global = true)]
    threads: Option<usize>,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Render a floor measurement from a hidden scene.
    Simulate,
    /// Recover hidden targets from a measurement CSV.
    Reconstruct,
    /// Sweep single-emitter bounds with and without the edge.
    Crb,
    /// Monte Carlo error statistics against frame averaging.
    Benchmark,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Simulate => "simulate",
            Command::Reconstruct => "reconstruct",
            Command::Crb => "crb",
            Command::Benchmark => "benchmark",
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {f}");
            ExitCode::from(f.code)
        }
    }
}

fn run(cli: &Cli) -> Result<(), Failure> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(Failure::config("--threads must be at least 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Failure::from(anyhow::Error::from(e)))?;
    }
    let path = cli
        .config
        .as_deref()
        .ok_or_else(|| Failure::config(format!("{} needs --config <path>", cli.command.name())))?;
    let mut out = OutDir::create(&cli.out)?;
    let mut info = RunInfo {
        command: cli.command.name(),
        config_path: path.display().to_string(),
        seed: None,
        algorithm: None,
        threads: cli.threads,
        status: String::new(),
    };

    match cli.command {
        Command::Simulate => {
            let mut cfg: SimulateConfig = loaded(config::load(path), &mut out, &info)?;
            cfg.seed = cli.seed.unwrap_or(cfg.seed);
            info_seed(&mut info, cfg.seed);
            let o = commands::simulate(&cfg, &mut out);
            finish(out, info, &cfg, o)
        }
        Command::Reconstruct => {
            let mut cfg: ReconstructConfig = loaded(config::load(path), &mut out, &info)?;
            let dir = path.parent().unwrap_or(Path::new("."));
            let o = commands::reconstruct(&mut cfg, dir, cli.algorithm, &mut out);
            info.algorithm = cfg.algorithm.map(|a| a.name().to_string());
            finish(out, info, &cfg, o)
        }
        Command::Crb => {
            let cfg: CrbConfig = loaded(config::load(path), &mut out, &info)?;
            let o = commands::crb(&cfg, &mut out);
            finish(out, info, &cfg, o)
        }
        Command::Benchmark => {
            let mut cfg: BenchmarkConfig = loaded(config::load(path), &mut out, &info)?;
            cfg.seed = cli.seed.unwrap_or(cfg.seed);
            info_seed(&mut info, cfg.seed);
            let o = commands::benchmark(&cfg, &mut out);
            finish(out, info, &cfg, o)
        }
    }
}

fn info_seed(info: &mut RunInfo, seed: u64) {
    info.seed = Some(seed);
}

/// Failed runs still get a manifest recording why.
fn loaded<T>(cfg: Result<T, Failure>, out: &mut OutDir, info: &RunInfo) -> Result<T, Failure> {
    cfg.map_err(|f| {
        let mut info = info.clone();
        info.status = format!("failed: {f}");
        match out.manifest(info, &serde_json::Value::Null) {
            Ok(()) => f,
            Err(e) => e,
        }
    })
}

fn finish<C: serde::Serialize>(
    mut out: OutDir,
    mut info: RunInfo,
    cfg: &C,
    outcome: Result<commands::Outcome, Failure>,
) -> Result<(), Failure> {
    let failure = match outcome {
        Ok(o) => {
            info.status = o.status;
            o.failure
        }
        Err(f) => {
            info.status = format!("failed: {f}");
            Some(f)
        }
    };
    out.manifest(info, cfg)?;
    match failure {
        Some(f) => Err(f),
        None => Ok(()),
    }
}
