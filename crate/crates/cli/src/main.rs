use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Parser, Subcommand};
use nls_bnf_cli::acceptance;
use nls_bnf_cli::commands::{self, ConfigError, Verdict};
use nls_bnf_cli::RunConfig;

#[derive(Parser)]
#[command(name = "nls-bnf", version, about = "Normal-form, small-divisor and stability experiments")]
struct Cli {
    /// TOML config; defaults come from $NLSBNF_CONFIG_DIR when absent.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Override a config field, e.g. `--set global.K=16`. Repeatable.
    #[arg(long = "set", value_name = "SECTION.KEY=VALUE", global = true)]
    overrides: Vec<String>,
    /// Output directory (global.output).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Base seed (global.seed).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Print the resolved config and exit.
    #[arg(long, global = true)]
    print_config: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write the sampled potential to potential.json.
    SamplePotential,
    /// Certify enumerated divisors for one potential and estimate the violation rate.
    DivisorScan,
    /// Run the iterated normal form and write H_b with its report.
    NormalForm,
    /// Long-time stability run, or an ensemble of them.
    Simulate,
    /// Run the acceptance suite.
    Accept {
        /// Comma-separated criterion numbers; all when absent.
        #[arg(long, value_delimiter = ',')]
        only: Vec<u8>,
    },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::SamplePotential => "sample-potential",
            Command::DivisorScan => "divisor-scan",
            Command::NormalForm => "normal-form",
            Command::Simulate => "simulate",
            Command::Accept { .. } => "accept",
        }
    }
}

fn resolve(cli: &Cli) -> Result<RunConfig> {
    let mut overrides = cli.overrides.clone();
    if let Some(o) = &cli.out {
        overrides.push(format!("global.output={:?}", o.display().to_string()));
    }
    if let Some(s) = cli.seed {
        overrides.push(format!("global.seed={s}"));
    }
    RunConfig::load(cli.config.as_deref(), cli.command.name(), &overrides)
        .map_err(|e| ConfigError(format!("{e:#}")).into())
}

fn accept(cfg: &RunConfig, only: &[u8]) -> Result<Verdict> {
    let ids: Vec<u8> = if only.is_empty() { acceptance::IDS.to_vec() } else { only.to_vec() };
    if let Some(bad) = ids.iter().find(|id| acceptance::describe(**id).is_none()) {
        return Err(ConfigError(format!("no criterion {bad}")).into());
    }
    let mut results = Vec::new();
    for id in ids {
        let r = acceptance::run_criterion(id).expect("known id");
        println!("{}", r.line());
        results.push(r);
    }
    std::fs::create_dir_all(&cfg.global.output)?;
    commands::write_json(&cfg.global.output.join("acceptance.json"), &results)?;
    Ok(Verdict::from_bool(results.iter().all(|r| r.passed)))
}

fn run(cli: &Cli) -> Result<Verdict> {
    let cfg = resolve(cli)?;
    if cli.print_config {
        print!("{}", cfg.to_toml());
        return Ok(Verdict::Pass);
    }
    match &cli.command {
        Command::SamplePotential => commands::sample_potential(&cfg),
        Command::DivisorScan => commands::divisor_scan(&cfg),
        Command::NormalForm => commands::normal_form(&cfg),
        Command::Simulate => commands::simulate(&cfg),
        Command::Accept { only } => accept(&cfg, only),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let code = match run(&cli) {
        Ok(v) => v.exit_code(),
        Err(e) => {
            eprintln!("error: {e:#}");
            commands::exit_code(&e)
        }
    };
    ExitCode::from(code as u8)
}
