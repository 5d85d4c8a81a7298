use clap::Parser;

fn main() {
    let cli = nssm::cli::Cli::parse();
    if let Err(e) = nssm::commands::run(cli) {
        eprintln!("{}", e.to_json());
        std::process::exit(e.exit_code());
    }
}
