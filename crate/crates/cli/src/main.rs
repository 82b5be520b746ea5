//! `homavg run <config>` and `homavg presets`.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use homavg::experiment::{execute, list_presets, ExperimentConfig, RunError};

#[derive(Parser)]
#[command(name = "homavg", version, about = "Homothetic average experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a TOML config.
    Run {
        config: PathBuf,
        /// Output prefix; overrides `output` in the config. Defaults to the
        /// config path without its extension.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Worker threads. Results do not depend on this.
        #[arg(long)]
        threads: Option<usize>,
    },
    /// List measure, flow, observable, spectral and correlation presets.
    Presets,
}

fn run(config_path: &Path, out: Option<PathBuf>, threads: Option<usize>) -> Result<Vec<PathBuf>, RunError> {
    let config = ExperimentConfig::load(config_path)?;
    let prefix =
        out.or_else(|| config.output.as_ref().map(PathBuf::from)).unwrap_or_else(|| config_path.with_extension(""));
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads {
        if n == 0 {
            return Err(RunError::Config("--threads must be at least 1".into()));
        }
        pool = pool.num_threads(n);
    }
    let pool = pool.build().map_err(|e| RunError::Config(e.to_string()))?;
    let outputs = pool.install(|| execute(&config))?;
    outputs.write(&prefix)
}

fn main() -> ExitCode {
    match Cli::parse().command {
        Command::Presets => {
            print!("{}", list_presets());
            ExitCode::SUCCESS
        }
        Command::Run { config, out, threads } => match run(&config, out, threads) {
            Ok(files) => {
                for f in files {
                    println!("wrote {}", f.display());
                }
                ExitCode::SUCCESS
            }
            Err(e) => {
                eprintln!("error: {e}");
                ExitCode::from(e.exit_code() as u8)
            }
        },
    }
}
