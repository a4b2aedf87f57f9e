use clap::Parser;
use loewner_cli::cli::{Cli, Command};
use loewner_cli::commands;

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => 0,
                // flag mistakes are execution errors (exit 1); 2 is reserved
                // for "a requested verdict is false"
                _ => 1,
            };
            let _ = e.print();
            std::process::exit(code);
        }
    };
    let result = match &cli.command {
        Command::Evolve(a) => commands::run_evolve(a),
        Command::Classify(a) => commands::run_classify(a),
        Command::Koenigs(a) => commands::run_koenigs(a),
        Command::Chain(a) => commands::run_chain(a),
        Command::Check(a) => commands::run_check(a),
        Command::Demo(a) => commands::run_demo(a),
    };
    match result {
        Ok(code) => std::process::exit(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            std::process::exit(1);
        }
    }
}
