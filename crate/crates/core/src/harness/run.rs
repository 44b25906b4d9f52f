//! `run`: build problems per seed, run every method on each, write outputs.

use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::config::{ExperimentConfig, Generator, MethodSpec, ProblemConfig};
use super::{predicted_rate, write_file};
use crate::error::{Error, Result};
use crate::optimizers::{run, Trajectory};
use crate::problems::{gram_problem, spectrum_problem, QuadraticProblem};
use crate::rates::{fit_slope, RateSpec, SlopeFit};
use crate::rng::stream;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RunStatus {
    Ok,
    Diverged,
    Failed,
}

/// Outcome of one (problem, method, seed) run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub problem: String,
    pub method: String,
    pub seed: u64,
    pub run_index: u64,
    pub status: RunStatus,
    /// Step-size scale used, when the method has one.
    pub lipschitz: Option<f64>,
    /// Trajectory CSV, relative to the output directory.
    pub trajectory: Option<String>,
    pub slope: Option<SlopeFit>,
    pub last_finite: Option<usize>,
    pub error: Option<String>,
    pub wall_seconds: f64,
}

/// Per (problem, method) summary across seeds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodSummary {
    pub problem: String,
    pub method: String,
    pub predicted: Option<RateSpec>,
    pub slopes: Vec<f64>,
    pub slope_mean: Option<f64>,
    pub slope_std: Option<f64>,
    pub completed: usize,
    pub diverged: usize,
    pub failed: usize,
    /// Aggregate CSV, relative to the output directory.
    pub aggregate: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool_version: String,
    /// SHA-256 of the canonical TOML form of the configuration.
    pub config_hash: String,
    pub iterations: usize,
    pub objective: u32,
    pub fit_window: usize,
    pub master_seed: u64,
    pub runs: Vec<RunRecord>,
    pub summaries: Vec<MethodSummary>,
    pub wall_seconds: f64,
}

impl RunManifest {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("manifest serializes")
    }

    /// True when every run completed.
    pub fn all_ok(&self) -> bool {
        self.runs.iter().all(|r| r.status == RunStatus::Ok)
    }
}

/// Stream index of a (problem, seed) pair; problems never share a stream.
pub fn run_index(problem_index: usize, seed: u64) -> u64 {
    ((problem_index as u64) << 32) | seed
}

/// Builds the problem for one (problem, seed) pair.
pub fn build_problem(
    problem: &ProblemConfig,
    master_seed: u64,
    index: u64,
) -> Result<QuadraticProblem> {
    let mut rng = stream(master_seed, index);
    let mut built = match problem.generator {
        Generator::Gram => gram_problem(
            problem.samples(),
            problem.dimension,
            problem.sigma2(),
            &mut rng,
        )?,
        Generator::Spectrum => {
            let dist = problem.limit_distribution()?;
            let eigvals = dist.sample_eigenvalues(problem.dimension, &mut rng)?;
            let mut p = spectrum_problem(eigvals, &mut rng)?;
            p.provenance.parameters = format!("{dist};d={}", problem.dimension);
            p
        }
    };
    built.provenance = built.provenance.with_stream(master_seed, index);
    Ok(built)
}

struct Outcome {
    record: RunRecord,
    trajectory: Option<Trajectory>,
}

fn trajectory_name(problem: &str, spec: &MethodSpec, seed: u64) -> String {
    format!("trajectories/{problem}__{}__seed{seed}.csv", spec.slug())
}

#[allow(clippy::too_many_arguments)]
fn run_one(
    config: &ExperimentConfig,
    dir: &Path,
    problem: &ProblemConfig,
    built: &QuadraticProblem,
    spec: &MethodSpec,
    predicted: Option<&RateSpec>,
    seed: u64,
    index: u64,
) -> Outcome {
    let start = Instant::now();
    let mut record = RunRecord {
        problem: problem.name.clone(),
        method: spec.to_string(),
        seed,
        run_index: index,
        status: RunStatus::Ok,
        lipschitz: spec
            .needs_lipschitz()
            .then(|| spec.lipschitz_for(built.l_instance())),
        trajectory: None,
        slope: None,
        last_finite: None,
        error: None,
        wall_seconds: 0.0,
    };
    let result = spec
        .resolve(built.l_instance())
        .and_then(|method| run(built, method, config.iterations));
    let trajectory = match result {
        Ok(traj) => {
            let name = trajectory_name(&problem.name, spec, seed);
            match write_file(&dir.join(&name), &traj.to_csv()) {
                Ok(()) => record.trajectory = Some(name),
                Err(e) => {
                    record.status = RunStatus::Failed;
                    record.error = Some(e.to_string());
                }
            }
            let include_log = config
                .fit
                .include_log
                .unwrap_or_else(|| predicted.is_some_and(|r| r.log_factor));
            let series = traj
                .series(config.fit.objective)
                .expect("objective validated");
            match fit_slope(series, config.fit.window, include_log) {
                Ok(fit) => record.slope = Some(fit),
                Err(e) => record.error = Some(format!("slope fit: {e}")),
            }
            Some(traj)
        }
        Err(Error::Diverged { last_finite }) => {
            record.status = RunStatus::Diverged;
            record.last_finite = Some(last_finite);
            record.error = Some(Error::Diverged { last_finite }.to_string());
            None
        }
        Err(e) => {
            record.status = RunStatus::Failed;
            record.error = Some(e.to_string());
            None
        }
    };
    record.wall_seconds = start.elapsed().as_secs_f64();
    Outcome { record, trajectory }
}

fn mean_std(values: &[f64]) -> (Option<f64>, Option<f64>) {
    if values.is_empty() {
        return (None, None);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let std = if values.len() > 1 {
        (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    (Some(mean), Some(std))
}

/// Mean and standard deviation of the log metrics per iteration.
fn aggregate_csv(trajectories: &[&Trajectory]) -> String {
    let mut out = String::from(
        "t,log_fgap_mean,log_fgap_std,log_gradsq_mean,log_gradsq_std,log_distsq_mean,log_distsq_std\n",
    );
    let len = trajectories.iter().map(|t| t.len()).min().unwrap_or(0);
    for t in 0..len {
        out.push_str(&t.to_string());
        for objective in [1, 2, 0] {
            let logs: Vec<f64> = trajectories
                .iter()
                .map(|tr| tr.series(objective).expect("valid objective")[t].ln())
                .collect();
            let (mean, std) = mean_std(&logs);
            out.push_str(&format!(
                ",{:.16e},{:.16e}",
                mean.unwrap_or(f64::NAN),
                std.unwrap_or(f64::NAN)
            ));
        }
        out.push('\n');
    }
    out
}

/// Runs every (problem, seed, method) combination of `config`.
///
/// Each (problem, seed) pair draws one problem from its own random stream and
/// all methods run on that same instance. A failing or diverging run is
/// recorded and does not affect the others. Trajectory CSVs depend only on
/// the configuration, not on the thread count.
pub fn cmd_run(config: &ExperimentConfig) -> Result<RunManifest> {
    config.validate()?;
    let started = Instant::now();
    let specs = config.method_specs()?;
    let dir = &config.output.dir;
    for sub in ["trajectories", "aggregates"] {
        let path = dir.join(sub);
        std::fs::create_dir_all(&path).map_err(|e| Error::io(&path, e))?;
    }
    let mut predictions = Vec::new();
    for p in &config.problems {
        let dist = p.limit_distribution()?;
        predictions.push(
            specs
                .iter()
                .map(|s| predicted_rate(&dist, s, config.fit.objective))
                .collect::<Vec<_>>(),
        );
    }
    let jobs: Vec<(usize, u64)> = (0..config.problems.len())
        .flat_map(|p| config.seeds.iter().map(move |&s| (p, s)))
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.workers)
        .build()
        .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))?;
    let outcomes: Vec<Vec<Outcome>> = pool.install(|| {
        jobs.par_iter()
            .map(|&(pi, seed)| {
                let problem = &config.problems[pi];
                let index = run_index(pi, seed);
                match build_problem(problem, config.master_seed, index) {
                    Ok(built) => specs
                        .par_iter()
                        .zip(&predictions[pi])
                        .map(|(spec, predicted)| {
                            run_one(
                                config,
                                dir,
                                problem,
                                &built,
                                spec,
                                predicted.as_ref(),
                                seed,
                                index,
                            )
                        })
                        .collect(),
                    Err(e) => specs
                        .iter()
                        .map(|spec| Outcome {
                            record: RunRecord {
                                problem: problem.name.clone(),
                                method: spec.to_string(),
                                seed,
                                run_index: index,
                                status: RunStatus::Failed,
                                lipschitz: None,
                                trajectory: None,
                                slope: None,
                                last_finite: None,
                                error: Some(format!("problem construction: {e}")),
                                wall_seconds: 0.0,
                            },
                            trajectory: None,
                        })
                        .collect(),
                }
            })
            .collect()
    });

    // Reduction: order by problem, method, seed.
    let mut runs = Vec::new();
    let mut summaries = Vec::new();
    for (pi, problem) in config.problems.iter().enumerate() {
        for (mi, spec) in specs.iter().enumerate() {
            let cell: Vec<&Outcome> = jobs
                .iter()
                .zip(&outcomes)
                .filter(|((p, _), _)| *p == pi)
                .map(|(_, o)| &o[mi])
                .collect();
            let slopes: Vec<f64> = cell
                .iter()
                .filter(|o| o.record.status == RunStatus::Ok)
                .filter_map(|o| o.record.slope.as_ref().map(|s| s.slope))
                .collect();
            let (slope_mean, slope_std) = mean_std(&slopes);
            let finished: Vec<&Trajectory> =
                cell.iter().filter_map(|o| o.trajectory.as_ref()).collect();
            let mut aggregate = None;
            if config.output.aggregates && !finished.is_empty() {
                let name = format!("aggregates/{}__{}.csv", problem.name, spec.slug());
                write_file(&dir.join(&name), &aggregate_csv(&finished))?;
                aggregate = Some(name);
            }
            let count = |s: RunStatus| cell.iter().filter(|o| o.record.status == s).count();
            summaries.push(MethodSummary {
                problem: problem.name.clone(),
                method: spec.to_string(),
                predicted: predictions[pi][mi].clone(),
                slopes,
                slope_mean,
                slope_std,
                completed: count(RunStatus::Ok),
                diverged: count(RunStatus::Diverged),
                failed: count(RunStatus::Failed),
                aggregate,
            });
            runs.extend(cell.iter().map(|o| o.record.clone()));
        }
    }
    let manifest = RunManifest {
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        config_hash: Sha256::digest(config.to_toml().as_bytes())
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect(),
        iterations: config.iterations,
        objective: config.fit.objective,
        fit_window: config.fit.window,
        master_seed: config.master_seed,
        runs,
        summaries,
        wall_seconds: started.elapsed().as_secs_f64(),
    };
    write_file(&manifest_path(dir), &manifest.to_json())?;
    Ok(manifest)
}

pub fn manifest_path(dir: &Path) -> PathBuf {
    dir.join("manifest.json")
}
