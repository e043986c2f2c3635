use std::process::ExitCode;

use clap::Parser;
use saddleflow_cli::{execute, Command, Options, RunConfig};

/// Saddle flow dynamics: integrate flows, solve LPs, reproduce the control example.
///
/// Exit status: 0 converged, 2 horizon reached, 3 diverged, 1 usage error.
#[derive(Parser)]
#[command(name = "saddleflow", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    options: Options,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    let outcome = RunConfig::from_options(&cli.options).and_then(|cfg| execute(cli.command, &cfg));
    match outcome {
        Ok(outcome) => {
            println!("{}", outcome.stop);
            ExitCode::from(outcome.exit_code)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
