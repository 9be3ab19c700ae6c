use std::io::Write;

use clap::Parser;
use hmt_gcs::cli::{run_console, run_headless, run_replay, Args};
use tracing_subscriber::EnvFilter;

#[tokio::main]
async fn main() -> std::process::ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(
            EnvFilter::try_from_default_env().unwrap_or_else(|_| EnvFilter::new("warn")),
        )
        .with_writer(std::io::stderr)
        .init();
    let args = Args::parse();
    let out = if args.replay.is_some() {
        run_replay(&args)
    } else if args.headless {
        run_headless(&args).await
    } else {
        run_console(&args).await
    };
    match out {
        Ok(text) => {
            // A closed stdout (say, piped into `head`) is not an error worth reporting.
            if !text.is_empty() {
                let _ = writeln!(std::io::stdout(), "{text}");
            }
            std::process::ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            std::process::ExitCode::FAILURE
        }
    }
}
