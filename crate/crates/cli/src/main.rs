use clap::Parser;
use tweetsent_cli::{run, Cli};

fn main() {
    let cli = Cli::parse();
    let level = if cli.global.quiet { "warn" } else { "info" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .init();
    if let Err(e) = run(cli) {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}
