use clap::Parser;

use fogfed::cli::{run, Cli};

fn main() {
    std::process::exit(run(Cli::parse()));
}
