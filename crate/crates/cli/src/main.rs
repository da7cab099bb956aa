mod args;
mod commands;
mod exit;
mod output;

use clap::error::ErrorKind;
use clap::Parser;

use args::{Cli, Command};
use output::Output;

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => exit::OK,
                _ => exit::USAGE,
            };
            let _ = e.print();
            std::process::exit(code);
        }
    };
    let out = Output {
        format: cli.format,
        quiet: cli.quiet,
    };
    let result = match &cli.command {
        Command::Label(a) => commands::label(a, &out),
        Command::Train(a) => commands::train(a, cli.seed, &out),
        Command::Detect(a) => commands::detect_cmd(a, &out),
        Command::Monitor(a) => commands::monitor(a),
        Command::Simulate(a) => commands::simulate(a, cli.seed, &out),
        Command::Evaluate(a) => commands::evaluate(a, &out),
    };
    let code = match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("overfitguard: {e}");
            e.code
        }
    };
    std::process::exit(code);
}
