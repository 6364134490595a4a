use std::fs;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use loose_decoy::source_sim::write_pulse_csv;
use loose_decoy_cli::commands::{self, EstimateFlags};
use loose_decoy_cli::{CliError, ScenarioConfig};

#[derive(Debug, Parser)]
#[command(
    name = "loose-decoy",
    version,
    about = "Decoy-state key-rate analysis for a loosely controlled source"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, clap::Args)]
struct ScenarioArgs {
    /// Scenario JSON; the built-in default scenario when omitted.
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
}

#[derive(Debug, clap::Args)]
struct FlagArgs {
    /// Assume zero vacuum yield (no vacuum pulses).
    #[arg(long)]
    two_intensity: bool,
    /// Use finite-size worst-case rates.
    #[arg(long)]
    finite_size: bool,
}

impl FlagArgs {
    fn flags(&self) -> EstimateFlags {
        EstimateFlags {
            two_intensity: self.two_intensity,
            finite_size: self.finite_size,
        }
    }
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Ideal and loose key-rate curves over the scenario's distance grid (CSV).
    KeyrateCurve {
        #[command(flatten)]
        scenario: ScenarioArgs,
        #[command(flatten)]
        flags: FlagArgs,
        /// Write the CSV here instead of standard output.
        #[arg(long, value_name = "PATH")]
        out: Option<PathBuf>,
    },
    /// Distance penalty of a fluctuation ratio lambda; with --config also the
    /// bisection-measured shift of the secure distance.
    Penalty {
        #[arg(long)]
        lambda: f64,
        /// Distance over which the channel halves the intensity [default: 15].
        #[arg(long, value_name = "KM")]
        half_distance: Option<f64>,
        #[arg(long, value_name = "PATH")]
        config: Option<PathBuf>,
        #[command(flatten)]
        flags: FlagArgs,
        /// Write the JSON report here; otherwise it follows the text report.
        #[arg(long, value_name = "PATH")]
        out: Option<PathBuf>,
    },
    /// Monte Carlo run of the fluctuating source (JSON summary).
    SimulateSource {
        #[command(flatten)]
        scenario: ScenarioArgs,
        /// Override the scenario seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Also dump every pulse as CSV to this file.
        #[arg(long, value_name = "PATH")]
        out: Option<PathBuf>,
    },
    /// Yield bounds and key rate from an observed-rates JSON file.
    Estimate {
        /// Observed rates: s_mu, s_mu_prime, e_mu, e_mu_prime, s_vac, n_mu, n_mu_prime, n_vac.
        rates: PathBuf,
        #[command(flatten)]
        scenario: ScenarioArgs,
        #[command(flatten)]
        flags: FlagArgs,
        #[arg(long, value_name = "PATH")]
        out: Option<PathBuf>,
    },
    /// Print the built-in default scenario.
    DefaultConfig,
}

fn read(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| CliError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })
}

fn load_config(path: Option<&Path>) -> Result<ScenarioConfig, CliError> {
    match path {
        None => Ok(ScenarioConfig::default()),
        Some(path) => {
            let text = read(path).map_err(|e| CliError::Config(e.to_string()))?;
            ScenarioConfig::from_json(&text)
        }
    }
}

fn emit(text: &str, out: Option<&Path>) -> Result<(), CliError> {
    match out {
        Some(path) => fs::write(path, text).map_err(|e| CliError::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        }),
        None => {
            let mut stdout = io::stdout().lock();
            stdout
                .write_all(text.as_bytes())
                .and_then(|_| stdout.flush())
                .map_err(|e| CliError::Io {
                    path: "<stdout>".into(),
                    message: e.to_string(),
                })
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::KeyrateCurve {
            scenario,
            flags,
            out,
        } => {
            let config = load_config(scenario.config.as_deref())?;
            let csv = commands::keyrate_curve(&config, flags.flags())?;
            emit(&csv, out.as_deref())
        }
        Command::Penalty {
            lambda,
            half_distance,
            config,
            flags,
            out,
        } => {
            let scenario = config
                .as_deref()
                .map(|p| load_config(Some(p)))
                .transpose()?;
            let report =
                commands::penalty(lambda, half_distance, scenario.as_ref(), flags.flags())?;
            match out {
                Some(path) => {
                    emit(&report.to_text(), None)?;
                    emit(&report.to_json(), Some(&path))
                }
                None => emit(&format!("{}{}", report.to_text(), report.to_json()), None),
            }
        }
        Command::SimulateSource {
            scenario,
            seed,
            out,
        } => {
            let config = load_config(scenario.config.as_deref())?;
            let (report, pulses) = commands::simulate_source(&config, seed)?;
            if let Some(path) = out {
                let file = fs::File::create(&path).map_err(|e| CliError::Io {
                    path: path.display().to_string(),
                    message: e.to_string(),
                })?;
                write_pulse_csv(&pulses, BufWriter::new(file)).map_err(|e| CliError::Io {
                    path: path.display().to_string(),
                    message: e.to_string(),
                })?;
            }
            emit(&report.to_json(), None)
        }
        Command::Estimate {
            rates,
            scenario,
            flags,
            out,
        } => {
            let config = load_config(scenario.config.as_deref())?;
            let text = read(&rates).map_err(|e| CliError::MalformedInput {
                path: rates.display().to_string(),
                message: e.to_string(),
            })?;
            let observed = commands::parse_rates(&rates.display().to_string(), &text)?;
            let report = commands::estimate(&observed, &config, flags.flags())?;
            for warning in &report.warnings {
                eprintln!("warning: {warning}");
            }
            emit(&report.to_json(), out.as_deref())
        }
        Command::DefaultConfig => emit(&ScenarioConfig::default().to_json(), None),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) if !err.use_stderr() => {
            // --help and --version
            let _ = err.print();
            return ExitCode::SUCCESS;
        }
        Err(err) => {
            let _ = err.print();
            return ExitCode::from(1);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("{}", err.to_json());
            ExitCode::from(err.exit_code() as u8)
        }
    }
}
