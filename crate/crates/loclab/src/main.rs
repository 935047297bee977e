use clap::{Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;

use loclab::{check, experiments, registry::Registry, CliError};

#[derive(Parser)]
#[command(name = "loclab", version, about = "Numerical laboratory for 2D lattice operators")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment described by a TOML config.
    Run { config: PathBuf },
    /// List the distribution and ensemble catalog.
    List {
        /// Extra palette file to merge into the catalog.
        #[arg(long)]
        palette: Option<PathBuf>,
    },
    /// Run a deterministic checker suite.
    Check {
        /// One of: eigenvar, taobound, contresbound, detmsa, geomres.
        lemma: String,
        /// TOML config supplying seed and trial count.
        instance: PathBuf,
    },
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Run { config } => {
            let dir = experiments::run(&config)?;
            println!("run complete: outputs in {}", dir.display());
            Ok(())
        }
        Command::List { palette } => {
            let registry = match palette {
                Some(path) => Registry::with_palette_file(&path)?,
                None => Registry::default(),
            };
            for line in registry.catalog() {
                println!("{line}");
            }
            Ok(())
        }
        Command::Check { lemma, instance } => {
            let (config, _) = loclab::config::RunConfig::load(&instance)?;
            let instances = config.params.instances.unwrap_or(config.run.trials);
            let report = check::run_suite(&lemma, instances, config.run.seed)?;
            println!("{}", report.line());
            if report.violations > 0 {
                return Err(CliError::Invalid(format!(
                    "{} conclusion violations",
                    report.violations
                )));
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(err.exit_code() as u8)
        }
    }
}
