use clap::Parser;

fn main() {
    let cli = rul_cli::Cli::parse();
    std::process::exit(rul_cli::run(cli));
}
