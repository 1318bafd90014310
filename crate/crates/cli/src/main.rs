use std::process::ExitCode;

use clap::Parser;

use cupgame_cli::{execute, exit_code, Cli, ExperimentSpec};

fn main() -> ExitCode {
    let cli = Cli::parse();
    let spec = ExperimentSpec {
        command: cli.command,
    };
    let stdout = std::io::stdout();
    let result = execute(&spec, &mut stdout.lock());
    if let Err(e) = &result {
        eprintln!("error: {e}");
    }
    ExitCode::from(exit_code(&result))
}
