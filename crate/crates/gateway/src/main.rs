use std::process::ExitCode;

use avatarqa_gateway::cli::{self, Cli, Command, ServeSettings};
use clap::Parser;
use tracing_subscriber::EnvFilter;

fn main() -> ExitCode {
    let cli = Cli::parse();
    tracing_subscriber::fmt()
        .with_env_filter(EnvFilter::try_from_default_env().unwrap_or_else(|_| EnvFilter::new("info")))
        .with_writer(std::io::stderr)
        .init();
    let result = match &cli.command {
        Command::Serve(args) => ServeSettings::resolve(args, cli.config.as_deref())
            .and_then(|settings| tokio::runtime::Runtime::new()?.block_on(cli::serve(settings))),
        _ => cli::run_stdio(&cli),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
