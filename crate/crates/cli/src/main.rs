//! `circuitflow` command-line tool.

mod cli;
mod manifest;
mod run;

use std::process::ExitCode;

use clap::Parser;

use cli::Cli;
use run::{Globals, Outcome};

const THREADS_ENV: &str = "CIRCUITFLOW_THREADS";

fn init_threads(flag: Option<usize>) -> anyhow::Result<()> {
    let n = match flag {
        Some(n) => Some(n),
        None => match std::env::var(THREADS_ENV) {
            Ok(v) => Some(
                v.trim().parse::<usize>().map_err(|_| anyhow::anyhow!("{THREADS_ENV}={v:?} is not a thread count"))?,
            ),
            Err(_) => None,
        },
    };
    if let Some(n) = n {
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    let result = init_threads(cli.threads).and_then(|_| run::run(cli.command, Globals { timings: cli.timings }));
    match result {
        Ok(Outcome::Ok) => ExitCode::SUCCESS,
        Ok(Outcome::Failed) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
