//! `ncs-tune`: simulation, tuning and study runs from JSON configs.
//!
//! Exit codes: 0 success, 1 bad config or I/O failure, 2 tuning finished but
//! its best controller is penalized (no stabilizing controller found).

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(name = "ncs-tune", version, about = "PID and fractional-order PID tuning over lossy networks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Experiment config (JSON).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory, created if missing.
    #[arg(long, global = true, default_value = ".")]
    out: PathBuf,
    /// Master seed; overrides the config's `seed`.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (defaults to the number of cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
}

#[derive(Debug, Clone, Copy, Subcommand)]
enum Command {
    /// Tune a PID or FOPID controller; writes result.json and history.csv.
    Tune,
    /// Simulate one controller; writes trace.csv and cost.json.
    Simulate,
    /// Expected cost over a (lambda, mu) grid; writes surface.csv.
    Sweep,
    /// Push packets through one channel; writes channel_stats.json and channel_log.csv.
    ChannelAudit,
    /// Static versus uniform delays; writes degradation.csv and degradation_summary.json.
    StudyDegradation,
    /// Receive buffers on versus off; writes buffer.csv.
    StudyBuffer,
    /// One controller under several delay laws; writes robustness.csv.
    StudyRobustness,
}

fn run(cli: &Cli) -> anyhow::Result<bool> {
    let Some(config) = cli.config.as_deref() else {
        anyhow::bail!("--config <path> is required");
    };
    if let Some(jobs) = cli.jobs {
        if jobs == 0 {
            anyhow::bail!("--jobs must be at least 1");
        }
        rayon::ThreadPoolBuilder::new().num_threads(jobs).build_global()?;
    }
    let ctx = commands::Ctx { config, out: &cli.out, seed: cli.seed };
    match cli.command {
        Command::Tune => commands::tune(&ctx),
        Command::Simulate => commands::simulate(&ctx),
        Command::Sweep => commands::sweep(&ctx),
        Command::ChannelAudit => commands::channel_audit(&ctx),
        Command::StudyDegradation => commands::study_degradation(&ctx),
        Command::StudyBuffer => commands::study_buffer(&ctx),
        Command::StudyRobustness => commands::study_robustness(&ctx),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
