use clap::Parser;

fn main() {
    let cli = pqeig::cli::Cli::parse();
    std::process::exit(pqeig::cli::main_with(cli));
}
