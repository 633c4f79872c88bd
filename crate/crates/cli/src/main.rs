mod args;
mod bench;
mod commands;
mod error;
mod io;
mod json;

use clap::error::ErrorKind;
use clap::Parser;

use args::{Cli, Command};
use error::CliError;

fn run(cli: Cli) -> Result<(), CliError> {
    match &cli.command {
        Command::Compress(a) => commands::compress(a),
        Command::Reconstruct(a) => commands::reconstruct(a),
        Command::Info(a) => commands::info(a),
        Command::Stats(a) => commands::stats(a),
        Command::Search(a) => commands::search(a),
        Command::Diff(a) => commands::diff(a),
        Command::Ppl(a) => commands::ppl(a),
        Command::PplDelta(a) => commands::ppl_delta(a),
        Command::AddToken(a) => commands::add_token(a),
        Command::Bench(a) => bench::bench(a),
        Command::Generate(a) => commands::generate(a),
    }
}

fn fail(err: &CliError) -> ! {
    eprintln!("{}", err.to_json());
    std::process::exit(err.exit_code());
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => e.exit(),
        Err(e) => {
            let message = e.render().to_string();
            let message = message.trim().trim_start_matches("error: ");
            fail(&CliError::Usage(message.to_string()))
        }
    };
    if let Err(err) = run(cli) {
        fail(&err);
    }
}
