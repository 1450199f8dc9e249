use clap::Parser;

fn main() {
    let cli = fedleak::cli::Cli::parse();
    if let Err(e) = fedleak::cli::run(cli) {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}
