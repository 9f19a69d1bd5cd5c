use clap::Parser;

fn main() {
    let cli = eagl::cli::Cli::parse();
    if let Err(e) = eagl::cli::run(cli) {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}
