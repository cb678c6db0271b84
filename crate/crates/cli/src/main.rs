mod args;
mod commands;
mod error;
mod io;

use clap::Parser;

use args::{Cli, Command};

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Ingest(a) => commands::ingest(a),
        Command::Ml(a) => commands::ml(a),
        Command::Drl(a) => commands::drl(a),
        Command::Sweep(a) => commands::sweep(a),
        Command::Frontier(a) => commands::frontier(a),
        Command::RegretSim(a) => commands::regret_sim(a),
        Command::Report(a) => commands::report(a),
        Command::Synth(a) => commands::synth(a),
    };
    if let Err(e) = result {
        eprintln!("maxlot: {e}");
        std::process::exit(e.exit_code());
    }
}
