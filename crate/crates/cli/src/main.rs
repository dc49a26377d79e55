use clap::Parser;

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = edei_cli::Cli::parse();
    if let Err(e) = edei_cli::run(cli) {
        eprintln!("edei: {e}");
        std::process::exit(e.exit_code());
    }
}
