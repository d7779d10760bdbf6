use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use rvpinn_cli::config::RunConfig;
use rvpinn_cli::run::{execute, sweep};
use rvpinn_cli::verify::{run_suite, Suite};
use rvpinn_cli::CliError;

#[derive(Parser)]
#[command(name = "rvpinn", version, about = "Robust variational PINNs for 1D diffusion-advection")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Overrides `output_dir` from the config.
    #[arg(long, global = true)]
    output_dir: Option<PathBuf>,
    /// Overrides `train.seed` from the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Train one configuration and write history, solution and summary.
    Train { config: PathBuf },
    /// Run a property suite; exits 1 if any check fails.
    Verify {
        #[arg(value_enum)]
        suite: Suite,
    },
    /// Repeat `train` for each epsilon and aggregate into sweep.csv.
    Sweep {
        config: PathBuf,
        #[arg(long, value_delimiter = ',', num_args = 1.., required = true)]
        epsilons: Vec<f64>,
    },
}

fn load(cli: &Cli, path: &PathBuf) -> Result<RunConfig, CliError> {
    let mut cfg = RunConfig::load(path)?;
    if let Some(dir) = &cli.output_dir {
        cfg.output_dir = dir.clone();
    }
    if let Some(seed) = cli.seed {
        cfg.train.seed = seed;
    }
    cfg.resolve()
}

fn run(cli: &Cli) -> Result<(), CliError> {
    match &cli.command {
        Command::Train { config } => {
            let cfg = load(cli, config)?;
            let result = execute(&cfg)?;
            let s = &result.summary;
            if let Some(last) = &s.final_record {
                println!(
                    "epoch {}: loss {:.6e}, phi_norm {:.6e}",
                    last.epoch, last.loss, last.phi_norm
                );
            }
            if let Some(best) = &s.best {
                match best.relative_error {
                    Some(rel) => println!("best epoch {}: relative energy error {rel:.6e}", best.epoch),
                    None => println!("best epoch {}: loss {:.6e}", best.epoch, best.loss),
                }
            }
            println!("wrote {}", cfg.output_dir.display());
            Ok(())
        }
        Command::Verify { suite } => {
            let checks = run_suite(*suite).map_err(|e| CliError::Numeric(e.to_string()))?;
            for c in &checks {
                println!("{}", c.line());
            }
            let failed = checks.iter().filter(|c| !c.passed).count();
            if failed > 0 {
                return Err(CliError::Property(format!("{failed} of {} checks failed", checks.len())));
            }
            Ok(())
        }
        Command::Sweep { config, epsilons } => {
            let cfg = load(cli, config)?;
            let result = sweep(&cfg, epsilons);
            if !matches!(result, Err(CliError::Config(_))) {
                println!("wrote {}", cfg.output_dir.join("sweep.csv").display());
            }
            result.map(|_| ())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("rvpinn: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
