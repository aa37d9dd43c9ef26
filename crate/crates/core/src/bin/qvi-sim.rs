use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use qvi_core::sim::{self, RunConfig, RunError};

#[derive(Parser)]
#[command(
    name = "qvi-sim",
    version,
    about = "Quaternion variational integrator simulations"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate one configuration and write CSV output
    Run {
        /// configuration file (`key = value` lines)
        config: PathBuf,
        /// override the configured output directory
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// Integrate several configurations concurrently and tabulate their errors
    Compare {
        #[arg(required = true, num_args = 2..)]
        configs: Vec<PathBuf>,
    },
}

fn load(path: &Path) -> Result<RunConfig, RunError> {
    let cfg = sim::load_config(path)?;
    for w in &cfg.warnings {
        log::warn!("{}: {w}", path.display());
    }
    Ok(cfg)
}

fn execute(cli: Cli) -> Result<(), RunError> {
    match cli.command {
        Command::Run { config, out_dir } => {
            let mut cfg = load(&config)?;
            if let Some(dir) = out_dir {
                cfg.out_dir = dir;
            }
            println!("{}", sim::run(&cfg)?);
        }
        Command::Compare { configs } => {
            let cfgs = configs
                .iter()
                .map(|p| load(p))
                .collect::<Result<Vec<_>, _>>()?;
            println!("{}", sim::compare(&cfgs)?);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("qvi-sim: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
