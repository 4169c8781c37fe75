use std::io::Write;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::error::ErrorKind;
use clap::Parser;

mod args;
mod commands;
mod header;

use args::{Cli, Command};
use commands::Output;

/// 1 for bad input, 2 when the filesystem failed us.
fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<summetrics::Error>() {
            return if e.is_io() { 2 } else { 1 };
        }
        if cause.is::<std::io::Error>() {
            return 2;
        }
    }
    1
}

fn emit(out: Output) -> Result<()> {
    match &out.path {
        Some(path) => std::fs::write(path, &out.bytes).with_context(|| format!("writing {}", path.display())),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(&out.bytes)?;
            stdout.flush().context("writing stdout")
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("configuring worker threads")?;
    }
    let out = match &cli.command {
        Command::Score(a) => commands::score(a, cli.seed)?,
        Command::Meta(a) => commands::meta(a, cli.seed)?,
        Command::Agreement(a) => commands::agreement(a, cli.seed)?,
        Command::LayerSweep(a) => commands::layer_sweep_cmd(a, cli.seed)?,
        Command::Report(a) => commands::report(a, cli.seed)?,
    };
    emit(out)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
