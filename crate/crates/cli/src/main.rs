use clap::Parser;

fn main() {
    ppd_cli::init_logging();
    let cli = ppd_cli::Cli::parse();
    if let Err(err) = ppd_cli::run(cli) {
        eprintln!("error: {err:#}");
        std::process::exit(ppd_cli::exit_code(&err));
    }
}
