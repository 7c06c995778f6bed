use clap::Parser;

fn main() {
    let cli = rca_cli::Cli::parse();
    if let Err(e) = rca_cli::run(cli) {
        eprintln!("error[{}]: {}", e.code(), e.message());
        std::process::exit(1);
    }
}
