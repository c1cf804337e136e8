use clap::Parser;
use loadbal_cli::cli::{execute, Cli};

fn main() {
    std::process::exit(execute(Cli::parse()));
}
