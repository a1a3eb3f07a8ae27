use clap::Parser;
use elastic_scatter::cli::{run, Cli};

fn main() {
    std::process::exit(run(Cli::parse()));
}
