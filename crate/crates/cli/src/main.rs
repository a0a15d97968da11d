use clap::Parser;

use rough_casimir_cli::{emit, execute, Cli};

fn main() {
    let cli = Cli::parse();
    let result = execute(&cli).and_then(|(out, text)| emit(out.as_deref(), &text));
    if let Err(e) = result {
        eprintln!("roughcas: {e}");
        std::process::exit(e.exit_code());
    }
}
