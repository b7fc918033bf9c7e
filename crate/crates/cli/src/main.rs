mod args;
mod commands;
mod manifest;

use std::process::ExitCode;

use clap::Parser;

use args::{Cli, Command};
use commands::UsageError;

const USAGE: u8 = 3;
const RUNTIME: u8 = 4;

fn is_usage(err: &anyhow::Error) -> bool {
    if err.downcast_ref::<UsageError>().is_some() {
        return true;
    }
    matches!(
        err.downcast_ref::<tslyap::Error>(),
        Some(
            tslyap::Error::UnknownFixture(_)
                | tslyap::Error::MissingParameter { .. }
                | tslyap::Error::InvalidHyper(_)
                | tslyap::Error::TooManyRules { .. }
        )
    )
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    tslyap::search::configure_global_pool();
    let result = match &cli.command {
        Command::Check(a) => commands::check(a),
        Command::Maximize(a) => commands::maximize(a),
        Command::Sweep(a) => commands::sweep_cmd(a),
        Command::Da(a) => commands::da(a),
        Command::Validate(a) => commands::validate(a),
        Command::Reproduce(a) => commands::reproduce(a),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(if is_usage(&e) { USAGE } else { RUNTIME })
        }
    }
}
