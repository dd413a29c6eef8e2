use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use diffrep_cli::{parse_config, run, RunError};

/// Evaluate Caputo derivatives via the diffusive representation and run
/// error studies. Writes one CSV table per run.
#[derive(Parser)]
#[command(version)]
struct Args {
    /// Run description (`key = value` lines)
    config: PathBuf,
    /// Write the CSV here instead of the config's `output` (or stdout)
    #[arg(short, long)]
    output: Option<PathBuf>,
}

fn main() -> ExitCode {
    let args = Args::parse();
    let result = std::fs::read_to_string(&args.config)
        .map_err(|source| RunError::Io {
            path: args.config.display().to_string(),
            source,
        })
        .and_then(|text| Ok(parse_config(&text)?))
        .and_then(|cfg| run(&cfg, args.output.as_deref()));
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("diffrep: {e}");
            // an unreadable config file is a config problem
            let code = match &e {
                RunError::Io { path, .. } if *path == args.config.display().to_string() => 2,
                _ => e.exit_code(),
            };
            ExitCode::from(code as u8)
        }
    }
}
