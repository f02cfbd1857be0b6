use std::io::Write;

use clap::Parser;
use physbound::cli::{run, Cli, EXIT_INVALID};

fn main() {
    let cli = Cli::parse();
    let (doc, code) = run(&cli);
    let written = match &cli.output {
        Some(path) => std::fs::write(path, format!("{doc}\n")),
        None => writeln!(std::io::stdout().lock(), "{doc}"),
    };
    // A closed stdout (e.g. piped into `head`) is not an error.
    if let Err(e) = written.or_else(|e| if e.kind() == std::io::ErrorKind::BrokenPipe { Ok(()) } else { Err(e) }) {
        eprintln!("physbound: cannot write output: {e}");
        std::process::exit(EXIT_INVALID);
    }
    std::process::exit(code);
}
