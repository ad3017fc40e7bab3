use clap::Parser;
use shadowlab::cli::{run_cli, Cli};

fn main() {
    std::process::exit(run_cli(Cli::parse()));
}
