use clap::Parser;

fn main() {
    let cli = hperc::cli::Cli::parse();
    std::process::exit(hperc::cli::run(cli));
}
