mod args;
mod commands;
mod error;
mod manifest;
mod output;

use clap::Parser;

use args::{Cli, Command};
use error::CliError;

fn dispatch(argv: Vec<String>) -> Result<(), CliError> {
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = e.exit_code();
            let _ = e.print();
            std::process::exit(code);
        }
    };
    match &cli.command {
        Command::Simulate(a) => commands::simulate(a),
        Command::Moments(a) => commands::moments(a),
        Command::Limits(a) => commands::limits(a),
        Command::Ensemble(a) => commands::ensemble(a),
        Command::Track(a) => commands::track(a),
        Command::Verify(a) => commands::verify(a),
        Command::Replay(a) => commands::replay(a, |args| {
            let mut argv = vec!["merw".to_string()];
            argv.extend(args);
            dispatch(argv)
        }),
    }
}

fn main() {
    if let Err(e) = dispatch(std::env::args().collect()) {
        eprintln!("merw: {e}");
        std::process::exit(e.exit_code());
    }
}
