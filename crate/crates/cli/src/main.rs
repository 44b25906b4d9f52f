use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use avgrate::harness::{
    best_cells, cmd_run, compare, exit, manifest_path, quadrature_table, rate_grid, rate_grid_csv,
    rate_table, rate_table_csv, rate_table_text, ExperimentConfig, MethodSpec, RateTarget,
    RunManifest, RunStatus,
};
use avgrate::param::Param;
use avgrate::rates::optimal_exponent;
use avgrate::spectra::SpectralDistribution;
use avgrate::Error;
use clap::{Parser, Subcommand, ValueEnum};

/// Average-case convergence experiments for first-order methods on random quadratics.
#[derive(Parser)]
#[command(name = "avgrate", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment suite described by a TOML config.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Override the worker count from the config (0 = all cores).
        #[arg(long)]
        workers: Option<usize>,
        /// Override the output directory from the config.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Expected metrics per iteration under a spectral distribution.
    Quadrature {
        /// e.g. `beta:tau=1/2,xi=-1/2`, `mp:r=1`, `gamma:alpha=0`.
        #[arg(long)]
        dist: SpectralDistribution,
        /// e.g. `gcm:alpha=1/2,beta=3/2`, `nesterov`, `gd:L=2`, `laguerre:alpha=2`.
        #[arg(long)]
        method: MethodSpec,
        #[arg(short = 'T', long = "iterations")]
        iterations: usize,
        /// Objective powers to report; repeatable. Defaults to 0, 1 and 2.
        #[arg(short = 'l', long = "objective")]
        objectives: Vec<u32>,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Predicted rate exponents for given edge exponents.
    Rates {
        #[arg(long, allow_hyphen_values = true)]
        tau: Param,
        #[arg(long, allow_hyphen_values = true)]
        xi: Param,
        /// Method to include; repeatable. `optimal` adds the best GCM tuning.
        #[arg(long = "method")]
        methods: Vec<RateTarget>,
        #[arg(short = 'l', long = "objective", default_value_t = 1)]
        objective: u32,
        /// Sweep GCM over an N x N lattice of (alpha, beta) in (-1, 4] instead.
        #[arg(long, value_name = "N")]
        grid: Option<usize>,
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Compare fitted slopes in a manifest with the predicted exponents.
    Compare {
        /// Manifest file or the output directory containing it.
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long, default_value_t = 0.25)]
        tol: f64,
        /// Tolerance for predictions with a log factor; defaults to --tol.
        #[arg(long)]
        log_tol: Option<f64>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Text,
    Csv,
}

fn emit(text: &str, output: Option<&PathBuf>) -> Result<(), Error> {
    match output {
        Some(path) => std::fs::write(path, text).map_err(|e| Error::Io {
            path: path.clone(),
            source: e,
        }),
        None => {
            // A closed pipe is not worth an error.
            let _ = std::io::stdout().write_all(text.as_bytes());
            Ok(())
        }
    }
}

fn exit_code_for(err: &Error) -> i32 {
    match err {
        Error::Config(_) | Error::Parse(_) | Error::InvalidArgument(_) | Error::Unsupported(_) => {
            exit::CONFIG
        }
        _ => exit::RUNTIME,
    }
}

fn execute(command: Command) -> Result<i32, Error> {
    match command {
        Command::Run {
            config,
            workers,
            output,
        } => {
            let mut config = ExperimentConfig::load(&config)?;
            if let Some(w) = workers {
                config.workers = w;
            }
            if let Some(dir) = output {
                config.output.dir = dir;
            }
            let manifest = cmd_run(&config)?;
            let mut text = String::new();
            for s in &manifest.summaries {
                let slope = match (s.slope_mean, s.slope_std) {
                    (Some(m), Some(sd)) => format!("{m:.3} +/- {sd:.3}"),
                    _ => "-".into(),
                };
                let predicted = s.predicted.as_ref().map_or("-".into(), |p| p.describe());
                text.push_str(&format!(
                    "{:<12} {:<36} slope {:<18} predicted {:<16} ok {} diverged {} failed {}\n",
                    s.problem, s.method, slope, predicted, s.completed, s.diverged, s.failed
                ));
            }
            for r in manifest.runs.iter().filter(|r| r.status != RunStatus::Ok) {
                eprintln!(
                    "{} {} seed {}: {}",
                    r.problem,
                    r.method,
                    r.seed,
                    r.error.as_deref().unwrap_or("")
                );
            }
            text.push_str(&format!(
                "manifest: {}\n",
                manifest_path(&config.output.dir).display()
            ));
            emit(&text, None)?;
            Ok(if manifest.all_ok() {
                exit::SUCCESS
            } else {
                exit::RUNTIME
            })
        }
        Command::Quadrature {
            dist,
            method,
            iterations,
            objectives,
            output,
        } => {
            let objectives = if objectives.is_empty() {
                vec![0, 1, 2]
            } else {
                objectives
            };
            let table = quadrature_table(&dist, &method, iterations, &objectives)?;
            emit(&table.to_csv(), output.as_ref())?;
            Ok(exit::SUCCESS)
        }
        Command::Rates {
            tau,
            xi,
            methods,
            objective,
            grid,
            format,
            output,
        } => {
            let text = match grid {
                Some(n) => {
                    let cells = rate_grid(tau, xi, objective, n)?;
                    match format {
                        Format::Csv => rate_grid_csv(&cells),
                        Format::Text => {
                            let best = best_cells(&cells);
                            let converging = cells.iter().filter(|c| c.converges()).count();
                            let mut s = format!("{converging} of {} cells converge\n", cells.len());
                            if let Some(first) = best.first() {
                                s.push_str(&format!(
                                    "fastest rate {} in {} cells, first at alpha={} beta={}\n",
                                    first.rate.describe(),
                                    best.len(),
                                    first.alpha,
                                    first.beta
                                ));
                            }
                            if let Ok(opt) = optimal_exponent(tau, xi, objective) {
                                let (a, b) = (opt.alpha.value(), opt.beta.value());
                                let hit = best.iter().any(|c| c.alpha == a && c.beta == b);
                                s.push_str(&format!(
                                    "optimal tuning alpha={} beta={} ({}) is {}among them\n",
                                    opt.alpha,
                                    opt.beta,
                                    opt.rate.describe(),
                                    if hit { "" } else { "not " }
                                ));
                            }
                            s
                        }
                    }
                }
                None => {
                    let targets = if methods.is_empty() {
                        RateTarget::defaults()
                    } else {
                        methods
                    };
                    let rows = rate_table(tau, xi, objective, &targets)?;
                    match format {
                        Format::Csv => rate_table_csv(&rows),
                        Format::Text => rate_table_text(&rows),
                    }
                }
            };
            emit(&text, output.as_ref())?;
            Ok(exit::SUCCESS)
        }
        Command::Compare {
            manifest,
            tol,
            log_tol,
        } => {
            let path = if manifest.is_dir() {
                manifest_path(&manifest)
            } else {
                manifest
            };
            let manifest = RunManifest::load(&path)?;
            let report = compare(&manifest, tol, log_tol.unwrap_or(tol));
            emit(&report.to_csv(), None)?;
            Ok(report.exit_code())
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // Usage errors share the config-error exit code; help and version succeed.
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() {
                exit::CONFIG as u8
            } else {
                0
            });
        }
    };
    let code = match execute(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code_for(&e)
        }
    };
    ExitCode::from(code as u8)
}
