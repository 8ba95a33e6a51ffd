use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::Serialize;

use super::config::{check_output_stem, RunConfig};
use super::export::{export_trajectory, Format};
use crate::error::{Error, Result};
use crate::measures::{classify_in, ClassifyOpts, OutcomeClass};
use crate::problems::SmoothedState;
use crate::solvers::{run_method, Trajectory};

/// Where run outputs go.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Sink {
    pub dir: PathBuf,
    pub format: Format,
}

impl Sink {
    pub fn new(dir: impl Into<PathBuf>, format: Format) -> Self {
        Self {
            dir: dir.into(),
            format,
        }
    }

    /// `dir/<stem>.<ext>`; the stem must be a plain relative path.
    pub fn path_for(&self, stem: &str, ext: &str) -> Result<PathBuf> {
        check_output_stem(stem)?;
        Ok(self.dir.join(format!("{stem}.{ext}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunResult {
    pub problem: String,
    pub algorithm: String,
    pub outputs: String,
    pub init: (f64, f64),
    pub outcome: OutcomeClass,
    pub final_state: SmoothedState,
    pub iterations: u64,
    pub final_residual: (f64, f64),
    #[serde(skip)]
    pub wall_time: Duration,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trajectory_file: Option<PathBuf>,
    #[serde(skip)]
    pub trajectory: Trajectory,
}

/// Run a single-point config, classify the outcome and, with a sink, export
/// the trajectory to `<dir>/<outputs>.<ext>`.
pub fn run_config(cfg: &RunConfig, sink: Option<&Sink>) -> Result<RunResult> {
    cfg.validate()?;
    let prob = cfg.problem()?;
    let method = cfg.method(&prob)?;
    let init = cfg.initial_state()?;
    let stop = cfg.effective_stop(&method);
    let started = Instant::now();
    let traj = run_method(&prob, &method, &init, &stop, cfg.record.every_k)?;
    let wall_time = started.elapsed();
    let outcome = classify_in(&prob, &traj, &ClassifyOpts::default());
    let trajectory_file = match sink {
        Some(s) => {
            let path = s.path_for(&cfg.outputs, s.format.extension())?;
            export_trajectory(&traj, &path, s.format)?;
            Some(path)
        }
        None => None,
    };
    Ok(RunResult {
        problem: prob.name().to_string(),
        algorithm: cfg.algorithm.to_string(),
        outputs: cfg.outputs.clone(),
        init: (init.x[0], init.y[0]),
        outcome,
        final_state: traj.last().clone(),
        iterations: traj.iterations,
        final_residual: traj.final_residual(),
        wall_time,
        trajectory_file,
        trajectory: traj,
    })
}

/// Run `configs` on up to `parallelism` threads. Results keep the input
/// order and match a sequential run; a failing member does not stop the
/// others.
pub fn run_batch(
    configs: &[RunConfig],
    parallelism: usize,
    sink: Option<&Sink>,
) -> Vec<Result<RunResult>> {
    let go = || configs.par_iter().map(|c| run_config(c, sink)).collect();
    match rayon::ThreadPoolBuilder::new()
        .num_threads(parallelism.max(1))
        .build()
    {
        Ok(pool) => pool.install(go),
        Err(_) => configs.iter().map(|c| run_config(c, sink)).collect(),
    }
}

#[derive(Serialize)]
struct SummaryRow<'a> {
    #[serde(skip_serializing_if = "Option::is_none")]
    problem: Option<&'a str>,
    #[serde(skip_serializing_if = "Option::is_none")]
    algorithm: Option<&'a str>,
    #[serde(skip_serializing_if = "Option::is_none")]
    outputs: Option<&'a str>,
    #[serde(skip_serializing_if = "Option::is_none")]
    init: Option<(f64, f64)>,
    #[serde(skip_serializing_if = "Option::is_none")]
    outcome: Option<&'a OutcomeClass>,
    #[serde(skip_serializing_if = "Option::is_none")]
    final_state: Option<&'a SmoothedState>,
    #[serde(skip_serializing_if = "Option::is_none")]
    iterations: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    final_residual: Option<(f64, f64)>,
    #[serde(skip_serializing_if = "Option::is_none")]
    trajectory_file: Option<&'a Path>,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<String>,
}

/// Deterministic JSON summary of a batch. Wall times are left out and
/// trajectory paths are written relative to the summary's directory.
pub fn write_summary<'a, I>(results: I, path: &Path) -> Result<()>
where
    I: IntoIterator<Item = std::result::Result<&'a RunResult, &'a Error>>,
{
    let base = path.parent().unwrap_or(Path::new(""));
    let rows: Vec<SummaryRow> = results
        .into_iter()
        .map(|r| match r {
            Ok(res) => SummaryRow {
                problem: Some(&res.problem),
                algorithm: Some(&res.algorithm),
                outputs: Some(&res.outputs),
                init: Some(res.init),
                outcome: Some(&res.outcome),
                final_state: Some(&res.final_state),
                iterations: Some(res.iterations),
                final_residual: Some(res.final_residual),
                trajectory_file: res
                    .trajectory_file
                    .as_deref()
                    .map(|f| f.strip_prefix(base).unwrap_or(f)),
                error: None,
            },
            Err(e) => SummaryRow {
                problem: None,
                algorithm: None,
                outputs: None,
                init: None,
                outcome: None,
                final_state: None,
                iterations: None,
                final_residual: None,
                trajectory_file: None,
                error: Some(e.to_string()),
            },
        })
        .collect();
    let text =
        serde_json::to_string_pretty(&rows).map_err(|e| Error::InvalidParam(e.to_string()))? + "\n";
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|source| Error::File {
            path: dir.to_path_buf(),
            source,
        })?;
    }
    std::fs::write(path, text).map_err(|source| Error::File {
        path: path.to_path_buf(),
        source,
    })
}
