use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use qmetro_cli::report::{render, CommandOutput, Format};
use qmetro_cli::{commands, config, CliError};

#[derive(Parser)]
#[command(name = "qmetro", version, about = "Quantum parameter-estimation toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// TOML description of the Hamiltonian, protocol, and experiment
    #[arg(long, value_name = "PATH")]
    config: PathBuf,
    /// Seed for the sampling streams (overrides the config)
    #[arg(long)]
    seed: Option<u64>,
    /// Write the report here instead of stdout
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
    /// Fail on non-regular outcome tables instead of excluding them
    #[arg(long)]
    strict: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Spectral sensitivity floor for a Hamiltonian
    Bound(Common),
    /// Exact outcome distribution and Fisher information
    Fisher(Common),
    /// Monte Carlo sampling with estimator statistics and a bound audit
    Simulate(Common),
    /// Optimal probe and readout for the configured generator
    Optimize(Common),
}

impl Command {
    fn common(&self) -> &Common {
        match self {
            Command::Bound(c) | Command::Fisher(c) | Command::Simulate(c) | Command::Optimize(c) => {
                c
            }
        }
    }
}

fn run(cli: &Cli) -> Result<String, CliError> {
    let common = cli.command.common();
    let cfg = config::load_config(&common.config)?;
    let output: CommandOutput = match &cli.command {
        Command::Bound(_) => commands::cmd_bound(&cfg),
        Command::Fisher(c) => commands::cmd_fisher(&cfg, c.strict),
        Command::Simulate(c) => commands::cmd_simulate(&cfg, c.seed, c.strict),
        Command::Optimize(_) => commands::cmd_optimize(&cfg),
    }?;
    render(&output, common.format)
}

fn main() {
    let cli = Cli::parse();
    let common = cli.command.common();
    match run(&cli) {
        Ok(text) => {
            if let Some(path) = &common.out {
                if let Err(e) = std::fs::write(path, text) {
                    eprintln!("error: {e}");
                    std::process::exit(qmetro_cli::exit_codes::PARSE);
                }
            } else {
                print!("{text}");
            }
        }
        Err(e) => {
            eprintln!("error: {}", e.message());
            std::process::exit(e.exit_code());
        }
    }
}
