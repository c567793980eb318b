mod args;
mod commands;

use std::io::Write;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::Parser;

use crate::args::{Cli, Command, StudyCommand};
use crate::commands::{CliError, CliResult, Outcome};

fn configure_threads() -> CliResult<()> {
    let Ok(raw) = std::env::var("MMLS_THREADS") else {
        return Ok(());
    };
    let threads = match raw.trim().parse::<usize>() {
        Ok(n) if n >= 1 => n,
        _ => {
            return Err(CliError::Usage(format!(
                "MMLS_THREADS must be a positive integer, got `{raw}`"
            )))
        }
    };
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| CliError::Usage(format!("cannot size the thread pool: {e}")))
}

fn run(cli: &Cli) -> CliResult<Outcome> {
    configure_threads()?;
    match &cli.command {
        Command::Denoise(a) => commands::denoise(a),
        Command::Project(a) => commands::project(a),
        Command::Sigma(a) => commands::sigma(a),
        Command::Study(StudyCommand::Convergence(a)) => commands::study_convergence(a),
        Command::Study(StudyCommand::Scaling(a)) => commands::study_scaling(a),
        Command::Study(StudyCommand::Denoise(a)) => commands::study_denoise(a),
    }
}

fn fail(code: &str, message: &str) -> ExitCode {
    let first = message.lines().next().unwrap_or_default();
    eprintln!("error: {code}: {first}");
    ExitCode::FAILURE
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => {
            print!("{e}");
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let text = e.render().to_string();
            let message = text.trim_start_matches("error: ");
            return fail("E_USAGE", message);
        }
    };
    match run(&cli) {
        Ok(outcome) => {
            let mut stdout = std::io::stdout().lock();
            if stdout.write_all(outcome.stdout.as_bytes()).is_err() {
                return fail("E_IO", "cannot write to stdout");
            }
            if let Some(summary) = outcome.summary {
                eprintln!("{summary}");
            }
            ExitCode::SUCCESS
        }
        Err(e) => fail(e.code(), &e.to_string()),
    }
}
