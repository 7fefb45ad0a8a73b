use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use tailrisk_core::scores::Metric;
use tailrisk_engine::synth::{self, Preset};
use tailrisk_engine::{emit_reports, prepare, run_study, ModelSpec, Overrides, StudyConfig};

/// Rolling 10-day ES and stressed ES forecasts, backtests and error scores.
#[derive(Parser)]
#[command(name = "tailrisk", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a study and write its reports.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Comma-separated model ids, replacing the config's list.
        #[arg(long, value_delimiter = ',')]
        models: Option<Vec<ModelSpec>>,
        /// Comma-separated metrics (es, ses).
        #[arg(long, value_delimiter = ',', value_parser = parse_metric)]
        metrics: Option<Vec<Metric>>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check a config and its panel without forecasting.
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
    /// Write a synthetic panel CSV.
    Synth {
        #[arg(long, value_enum)]
        preset: Preset,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
}

fn parse_metric(s: &str) -> Result<Metric, String> {
    match s.trim() {
        "es" => Ok(Metric::Es),
        "ses" => Ok(Metric::Ses),
        other => Err(format!("unknown metric `{other}` (expected es or ses)")),
    }
}

const EXIT_CONFIG: u8 = 1;
const EXIT_PARTIAL: u8 = 2;

fn main() -> ExitCode {
    // Usage errors share the config exit code; 2 is reserved for partial failures.
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if e.use_stderr() => {
            let _ = e.print();
            return ExitCode::from(EXIT_CONFIG);
        }
        Err(e) => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
    };
    match cli.command {
        Command::Run {
            config,
            models,
            metrics,
            seed,
            out,
        } => {
            let cfg = StudyConfig::load(&config).map(|mut c| {
                c.apply(Overrides {
                    models,
                    metrics,
                    seed,
                    out_dir: out,
                });
                c
            });
            let result = cfg.and_then(|c| run_study(&c, None));
            let result = match result {
                Ok(r) => r,
                Err(e) => {
                    eprintln!("error: {e}");
                    return ExitCode::from(EXIT_CONFIG);
                }
            };
            let out_dir = result.config.out_dir.clone().unwrap_or_else(|| PathBuf::from("out"));
            if let Err(e) = emit_reports(&result, &out_dir) {
                eprintln!("error: {e}");
                return ExitCode::from(EXIT_CONFIG);
            }
            println!(
                "{} forecast dates, {} records, {} failures; reports in {}",
                result.forecast_dates.len(),
                result.n_records(),
                result.failures.len(),
                out_dir.display()
            );
            if result.failures.is_empty() {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(EXIT_PARTIAL)
            }
        }
        Command::Validate { config } => {
            let checked = StudyConfig::load(&config).and_then(|c| {
                c.validate()?;
                prepare(&c)
            });
            match checked {
                Ok(p) => {
                    let dates = p.forecast_dates();
                    println!(
                        "ok: {} forecast dates from {} to {}",
                        dates.len(),
                        dates[0],
                        dates[dates.len() - 1]
                    );
                    for w in &p.warnings {
                        println!("warning: {w}");
                    }
                    ExitCode::SUCCESS
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    ExitCode::from(EXIT_CONFIG)
                }
            }
        }
        Command::Synth { preset, n, seed, out } => {
            match synth::generate(preset, n, seed).and_then(|p| synth::write_csv(&p, &out)) {
                Ok(()) => ExitCode::SUCCESS,
                Err(e) => {
                    eprintln!("error: {e}");
                    ExitCode::from(EXIT_CONFIG)
                }
            }
        }
    }
}
