mod commands;
mod config;
mod error;
mod output;

use std::process::ExitCode;

use clap::Parser;
use log::warn;
use serde_json::Value;

use config::{Cli, Command, ReplayArgs};
use error::{CliError, Result};
use output::Timings;

fn configure_threads() {
    let Ok(v) = std::env::var("PHASESYNC_THREADS") else {
        return;
    };
    match v.trim().parse::<usize>() {
        Ok(n) if n > 0 => {
            if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
                warn!("could not size the worker pool: {e}");
            }
        }
        _ => warn!("ignoring PHASESYNC_THREADS={v:?}"),
    }
}

fn load_replay(args: &ReplayArgs) -> Result<Command> {
    let text = std::fs::read_to_string(&args.sidecar_file)?;
    let meta: Value = serde_json::from_str(&text)?;
    let config = meta
        .get("config")
        .ok_or_else(|| CliError::Usage(format!("{} has no config", args.sidecar_file.display())))?;
    let mut cmd: Command = serde_json::from_value(config.clone())?;
    let output = cmd.output_mut().expect("stored configs are runnable");
    output.out = args.out.clone();
    output.sidecar = args.sidecar.clone();
    Ok(cmd)
}

fn execute(mut cmd: Command) -> Result<()> {
    if let Command::Replay(args) = &cmd {
        cmd = load_replay(args)?;
    }
    cmd.resolve_inputs()?;
    let mut timings = Timings::default();
    let start = std::time::Instant::now();
    let report = commands::run(&cmd, &mut timings)?;
    timings.set("total", start.elapsed().as_secs_f64());
    output::write_report(report, &cmd, &timings)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    configure_threads();
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) if e.is_broken_pipe() => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.to_json());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
