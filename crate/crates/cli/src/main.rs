//! `nodim` command-line runner. Exit status is 0 when the run passes, 1 when
//! a check fails, and 2 on malformed input or an internal error.

mod args;
mod commands;
mod report;

use std::process::ExitCode;

use clap::Parser;

/// Caps the worker pool when `NODIM_THREADS` is set.
fn configure_threads() -> anyhow::Result<()> {
    if let Ok(raw) = std::env::var("NODIM_THREADS") {
        let n: usize = raw
            .parse()
            .map_err(|_| anyhow::anyhow!("NODIM_THREADS must be a positive integer, got {raw:?}"))?;
        rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global()?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = args::Cli::parse();
    let outcome = configure_threads().and_then(|_| commands::run(cli));
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
