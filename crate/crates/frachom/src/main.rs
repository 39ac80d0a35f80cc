use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use frachom::report::emit_report;
use frachom::runner::config_hash;
use frachom::{run, Command, ExperimentConfig, RunError};

/// Fractional homogenization experiments driven by a JSON configuration.
///
/// Exit status: 0 all verdicts pass, 1 a verdict failed, 2 invalid
/// configuration, 3 solver or filesystem failure.
#[derive(Debug, Parser)]
#[command(name = "frachom", version)]
struct Cli {
    #[arg(value_enum)]
    command: Command,
    #[arg(long)]
    config: PathBuf,
    /// Report directory; defaults to the config's `output_dir`, then `out`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overrides the config's seed.
    #[arg(long)]
    seed: Option<u64>,
}

fn load(cli: &Cli) -> Result<ExperimentConfig, RunError> {
    let text = std::fs::read_to_string(&cli.config)
        .map_err(|e| RunError::Schema(format!("cannot read {}: {e}", cli.config.display())))?;
    let mut config = ExperimentConfig::from_json(&text)?;
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    config.validate()?;
    Ok(config)
}

fn execute(cli: &Cli) -> Result<u8, RunError> {
    let config = load(cli)?;
    if cli.command == Command::Validate && config.command != Command::Validate {
        println!("config valid: {} ({})", cli.config.display(), config.command.name());
        return Ok(0);
    }
    if cli.command != config.command {
        return Err(RunError::Schema(format!(
            "command `{}` does not match the config's `{}`",
            cli.command.name(),
            config.command.name()
        )));
    }
    let dir = cli.out.clone().or_else(|| config.output_dir.as_ref().map(PathBuf::from)).unwrap_or_else(|| PathBuf::from("out"));
    let outcome = run(&config)?;
    emit_report(&outcome.artifacts, &dir, &config_hash(&config))?;
    for (name, pass) in &outcome.verdicts {
        println!("{name}: {}", if *pass { "PASS" } else { "FAIL" });
    }
    if let Some(f) = &outcome.failure {
        eprintln!("partial report: {f}");
    }
    println!("reports written to {}", dir.display());
    Ok(outcome.exit_code())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("frachom: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
