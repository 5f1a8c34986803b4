use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use furstenberg_cli::{run, Command, CliError, ExperimentConfig, EXIT_CHECK, EXIT_CONFIG};

#[derive(Parser)]
#[command(name = "furstenberg", version, about = "Exact dyadic incidence experiments")]
struct Cli {
    #[command(subcommand)]
    command: Top,
    /// Destination of the main output; the JSON artifact is written next to it.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Top {
    #[command(flatten)]
    Experiment(Command),
    /// Run a versioned JSON experiment config.
    Run { config: PathBuf },
}

fn execute(cli: Cli) -> Result<Option<String>, CliError> {
    let (command, out) = match cli.command {
        Top::Experiment(c) => (c, cli.out),
        Top::Run { config } => {
            let cfg = ExperimentConfig::from_json(&std::fs::read_to_string(&config)?)?;
            (cfg.command, cli.out.or(cfg.output))
        }
    };
    let art = run(&command)?;
    match &out {
        Some(path) => {
            std::fs::write(path, &art.body)?;
            if let Some(j) = &art.json {
                std::fs::write(path.with_extension("json"), serde_json::to_string_pretty(j).expect("json serialises"))?;
            }
        }
        None => print!("{}", art.body),
    }
    eprintln!("{}", art.summary);
    Ok(art.failure)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_CONFIG as u8 } else { 0 });
        }
    };
    match execute(cli) {
        Ok(None) => ExitCode::SUCCESS,
        Ok(Some(failure)) => {
            let w = CliError::Check(failure).witness();
            eprintln!("{w}");
            ExitCode::from(EXIT_CHECK as u8)
        }
        Err(e) => {
            eprintln!("{}", e.witness());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
