mod args;
mod commands;
mod config;

use args::{Cli, Command};
use clap::Parser;

fn main() {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Synth(a) => commands::run_synth(a, &cli.config, cli.seed),
        Command::Train(a) => commands::run_train(a, &cli.config, cli.seed),
        Command::Eval(a) => commands::run_eval(a, &cli.config),
        Command::AblateMask(a) => commands::run_ablate_mask(a, &cli.config, cli.seed),
        Command::AblateMels(a) => commands::run_ablate_mels(a, &cli.config, cli.seed),
        Command::Inspect(a) => commands::run_inspect(a),
        Command::Gradcheck(a) => commands::run_gradcheck(a, cli.seed),
    };
    if let Err(err) = result {
        eprintln!("error: {err}");
        std::process::exit(1);
    }
}
