use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};
use vbs_beamsim::config::ExperimentConfig;
use vbs_beamsim::pipeline;

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Stage {
    GenerateScene,
    Scan,
    BuildVbs,
    Align,
    Report,
    All,
}

/// Scene → LiDAR scan → VBS store → beam alignment sweep → report.
#[derive(Parser, Debug)]
#[command(version)]
struct Cli {
    #[arg(value_enum)]
    stage: Stage,
    /// JSON experiment config; omitted keys take their defaults.
    #[arg(long)]
    config: PathBuf,
    /// Overrides `seed` from the config.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

fn run(cli: Cli) -> vbs_beamsim::Result<()> {
    let mut cfg = ExperimentConfig::load(&cli.config)?;
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    let out = cli.out.as_path();
    match cli.stage {
        Stage::GenerateScene => pipeline::cmd_generate_scene(&cfg, out).map(drop),
        Stage::Scan => pipeline::cmd_scan(&cfg, out).map(drop),
        Stage::BuildVbs => pipeline::cmd_build_vbs(&cfg, out).map(drop),
        Stage::Align => pipeline::cmd_align(&cfg, out).map(drop),
        Stage::Report => pipeline::cmd_report(out).map(drop),
        Stage::All => pipeline::cmd_all(&cfg, out).map(drop),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    if let Some(n) = std::env::var("VBS_BEAMSIM_THREADS").ok().and_then(|v| v.parse::<usize>().ok()) {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global() {
            log::warn!("VBS_BEAMSIM_THREADS ignored: {e}");
        }
    }
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
