use clap::Parser;
use cqed_cli::{run, Cli};

fn main() {
    let cli = Cli::parse();
    let (_, result) = run(&cli);
    if let Err(e) = result {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}
