use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

mod config;
mod run;

use config::{parse_override, ConfigError};
use run::RunError;

/// Unary option-pricing experiments.
#[derive(Parser, Debug)]
#[command(name = "unary-pricing", version)]
struct Cli {
    /// TOML experiment file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// price, converge, gan-train or mc-baseline.
    #[arg(long)]
    mode: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Print every configuration key with its default and exit.
    #[arg(long)]
    print_defaults: bool,
    /// Dotted overrides, e.g. `ae.depths=0..50 gan.generations=20`.
    overrides: Vec<String>,
}

fn execute(cli: &Cli) -> Result<serde_json::Value, RunError> {
    let mut overrides = cli
        .overrides
        .iter()
        .map(|o| parse_override(o))
        .collect::<Result<Vec<_>, ConfigError>>()?;
    if let Some(m) = &cli.mode {
        overrides.push(("mode".into(), m.clone()));
    }
    if let Some(s) = cli.seed {
        overrides.push(("seed".into(), s.to_string()));
    }
    if let Some(o) = &cli.out {
        overrides.push(("output_dir".into(), format!("{:?}", o.display().to_string())));
    }
    let cfg = config::load(cli.config.as_deref(), &overrides)?;
    log::info!("mode {} seed {} -> {}", cfg.mode, cfg.seed, cfg.output_dir.display());
    run::run(&cfg)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    if cli.print_defaults {
        print!("{}", config::reference_page());
        return ExitCode::SUCCESS;
    }
    match execute(&cli) {
        Ok(summary) => {
            println!("{}", serde_json::to_string_pretty(&summary).expect("json summary"));
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(match e {
                RunError::Config(_) => 2,
                RunError::Runtime(_) => 1,
            })
        }
    }
}
