use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use mastergeo_cli::config::{ExperimentConfig, Overrides};
use mastergeo_cli::error::CliError;
use mastergeo_cli::geometry::{self, CoordInput};
use mastergeo_cli::simulate;
use mastergeo_cli::verify;

/// Simulator and verifier for solvable master equations and their
/// information- and contact-geometric structure.
#[derive(Parser)]
#[command(name = "mastergeo", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate the configured system and write a trajectory CSV.
    Simulate {
        /// JSON experiment configuration.
        config: PathBuf,
        /// Override the configured output path.
        #[arg(long)]
        output: Option<PathBuf>,
        /// Override the configured horizon.
        #[arg(long = "t-max")]
        t_max: Option<f64>,
        /// Override the configured step size.
        #[arg(long)]
        dt: Option<f64>,
        /// Override the configured seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Report potentials, metric data, and connections at one point.
    Geometry {
        /// JSON model definition.
        model: PathBuf,
        /// Natural parameters, comma separated.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        theta: Option<Vec<f64>>,
        /// Expectation parameters, comma separated.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        eta: Option<Vec<f64>>,
    },
    /// Run the invariant suite (exit 3 on any failure).
    Verify {
        /// all, exp_family, legendre, master, moments, or contact.
        #[arg(default_value = "all")]
        scope: String,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            // Help and version are not failures; anything else is a usage
            // (validation) error.
            let code = if err.use_stderr() { 1 } else { 0 };
            let _ = err.print();
            return ExitCode::from(code);
        }
    };
    match dispatch(cli) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(err.exit_code() as u8)
        }
    }
}

fn dispatch(cli: Cli) -> Result<ExitCode, CliError> {
    match cli.command {
        Command::Simulate {
            config,
            output,
            t_max,
            dt,
            seed,
        } => {
            let mut cfg = ExperimentConfig::load(&config)?;
            cfg.apply(Overrides {
                output,
                t_max,
                dt,
                seed,
            });
            let summary = simulate::run(&cfg)?;
            println!("{summary}");
            Ok(ExitCode::SUCCESS)
        }
        Command::Geometry { model, theta, eta } => {
            let text = std::fs::read_to_string(&model)
                .map_err(|e| CliError::Validation(format!("model {}: {e}", model.display())))?;
            let state_space = mastergeo::model_from_json(&text)?;
            let input = match (theta, eta) {
                (Some(t), None) => CoordInput::Theta(t),
                (None, Some(e)) => CoordInput::Eta(e),
                _ => {
                    return Err(CliError::Validation(
                        "give exactly one of --theta or --eta".into(),
                    ))
                }
            };
            let report = geometry::run(&state_space, &input)?;
            let json =
                serde_json::to_string_pretty(&report).expect("report serialization cannot fail");
            println!("{json}");
            Ok(ExitCode::SUCCESS)
        }
        Command::Verify { scope } => {
            let results = verify::run_scope(&scope)?;
            for r in &results {
                println!("{}", r.line());
            }
            let passed = results.iter().filter(|r| r.passed).count();
            println!("verify: {passed}/{} passed", results.len());
            Ok(ExitCode::from(verify::exit_code(&results) as u8))
        }
    }
}
