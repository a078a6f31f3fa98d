use clap::Parser;
use mmlr::cli::{exit_code, run, Cli};

fn main() {
    let cli = Cli::parse();
    let outcome = run(&cli, &mut std::io::stdout().lock());
    if let Err(e) = &outcome {
        eprintln!("error: {e}");
    }
    std::process::exit(exit_code(&outcome));
}
