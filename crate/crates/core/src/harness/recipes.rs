use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use super::config::RunConfig;
use super::export::{write_audit_csv, write_feasibility_csv, write_rho_csv};
use super::run::{run_batch, RunResult, Sink};
use crate::analysis::{feasibility_point, feasibility_scan, rho_at, universal_params, RhoField};
use crate::error::{Error, Result};
use crate::oracle::{Oracle, OracleConfig};
use crate::problems::{builtin, SmoothedState};
use crate::solvers::{run_method, AlgoParams, Method, StopMode, StoppingRule};

macro_rules! recipe_files {
    ($($name:literal),* $(,)?) => {
        &[$(($name, include_str!(concat!("../../recipes/", $name, ".toml")))),*]
    };
}

/// Built-in recipes as `(name, TOML source)`.
pub const RECIPES: &[(&str, &str)] = recipe_files!(
    "forsaken",
    "bilinear-coupled-10",
    "bilinear-coupled-11",
    "sixth-order",
    "polar-game",
    "polar-on-cycle",
    "kl-nc-universal",
    "wrong-smoothing",
    "toy-gda-osc",
    "feasibility-scan",
    "rho-scan",
    "descent-audit",
);

pub fn recipe_names() -> impl Iterator<Item = &'static str> {
    RECIPES.iter().map(|(n, _)| *n)
}

/// Parameter feasibility scan over `t1 x t2`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FeasibilitySpec {
    pub l: f64,
    pub beta: f64,
    pub mu: f64,
    pub t1: [f64; 2],
    pub t2: [f64; 2],
    pub steps: usize,
    pub outputs: String,
}

/// Sampled weak-MVI field with a reference point to report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RhoSpec {
    pub problem: String,
    pub u_star: [f64; 2],
    pub resolution: usize,
    pub witness: [f64; 2],
    pub outputs: String,
}

/// Oracle audit of the descent estimate along a DS-GDA run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AuditSpec {
    pub problem: String,
    pub params: AlgoParams,
    pub init: [f64; 2],
    pub iterations: u64,
    pub outputs: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Recipe {
    pub description: String,
    #[serde(default, rename = "run")]
    pub runs: Vec<RunConfig>,
    #[serde(default)]
    pub feasibility: Option<FeasibilitySpec>,
    #[serde(default)]
    pub rho: Vec<RhoSpec>,
    #[serde(default)]
    pub audit: Vec<AuditSpec>,
}

impl Recipe {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::config("recipe", e.message().to_string()))
    }

    pub fn builtin(name: &str) -> Result<Self> {
        let text = RECIPES
            .iter()
            .find(|(n, _)| *n == name)
            .map(|(_, t)| *t)
            .ok_or_else(|| {
                let known: Vec<&str> = recipe_names().collect();
                Error::config(
                    "recipe",
                    format!("unknown recipe `{name}`; available: {}", known.join(", ")),
                )
            })?;
        Self::parse(text)
    }
}

/// Command-line knobs shared by every recipe.
#[derive(Debug, Clone, Default)]
pub struct RecipeOpts {
    pub sink: Option<Sink>,
    pub parallelism: usize,
    pub tol: Option<f64>,
    pub max_iters: Option<u64>,
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FeasibilityReport {
    pub feasible: usize,
    pub total: usize,
    /// `(t1, t2)` of the universal parameters at `l`.
    pub universal: (f64, f64),
    pub universal_feasible: bool,
    pub file: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RhoReport {
    pub problem: String,
    pub witness: (f64, f64),
    /// `rho` evaluated exactly at the witness.
    pub witness_rho: Option<f64>,
    pub min_rho: f64,
    pub min_at: (f64, f64),
    pub file: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AuditReport {
    pub problem: String,
    pub steps: usize,
    pub min_margin: f64,
    /// Largest `Phi^{t+1} - Phi^t`.
    pub max_phi_increase: f64,
    pub tolerance: f64,
    pub file: Option<PathBuf>,
}

#[derive(Debug, Default)]
pub struct RecipeReport {
    pub runs: Vec<(RunConfig, Result<RunResult>)>,
    pub feasibility: Option<FeasibilityReport>,
    pub rho: Vec<RhoReport>,
    pub audits: Vec<Result<AuditReport>>,
}

impl RecipeReport {
    /// Member failures of runs and audits.
    pub fn errors(&self) -> impl Iterator<Item = &Error> {
        self.runs
            .iter()
            .filter_map(|(_, r)| r.as_ref().err())
            .chain(self.audits.iter().filter_map(|r| r.as_ref().err()))
    }
}

pub fn run_recipe(recipe: &Recipe, opts: &RecipeOpts) -> Result<RecipeReport> {
    let mut report = RecipeReport::default();
    let mut members = Vec::new();
    for cfg in &recipe.runs {
        let cfg = cfg
            .clone()
            .with_overrides(opts.tol, opts.max_iters, opts.seed);
        members.extend(cfg.expand()?);
    }
    let results = run_batch(&members, opts.parallelism, opts.sink.as_ref());
    report.runs = members.into_iter().zip(results).collect();
    if let Some(spec) = &recipe.feasibility {
        report.feasibility = Some(feasibility(spec, opts.sink.as_ref())?);
    }
    for spec in &recipe.rho {
        report.rho.push(rho(spec, opts.sink.as_ref())?);
    }
    for spec in &recipe.audit {
        report.audits.push(audit(spec, opts.sink.as_ref()));
    }
    Ok(report)
}

fn output(sink: Option<&Sink>, stem: &str) -> Result<Option<PathBuf>> {
    sink.map(|s| s.path_for(stem, "csv")).transpose()
}

fn feasibility(spec: &FeasibilitySpec, sink: Option<&Sink>) -> Result<FeasibilityReport> {
    let scan = feasibility_scan(
        spec.l,
        spec.beta,
        spec.mu,
        (spec.t1[0], spec.t1[1]),
        (spec.t2[0], spec.t2[1]),
        spec.steps,
    );
    let u = universal_params(spec.l)?;
    let t2 = u.r1 / spec.l;
    let t1 = 1.0 / (u.c * u.r1);
    let file = output(sink, &spec.outputs)?;
    if let Some(path) = &file {
        write_feasibility_csv(&scan, path)?;
    }
    Ok(FeasibilityReport {
        feasible: scan.count_feasible(),
        total: scan.t1.len() * scan.t2.len(),
        universal: (t1, t2),
        universal_feasible: feasibility_point(spec.l, spec.beta, spec.mu, t1, t2).feasible,
        file,
    })
}

fn rho(spec: &RhoSpec, sink: Option<&Sink>) -> Result<RhoReport> {
    let prob = builtin(&spec.problem)?;
    let u_star = (spec.u_star[0], spec.u_star[1]);
    let field = RhoField::sample(&prob, u_star, spec.resolution)?;
    let witness_rho = rho_at(
        &prob,
        (&[u_star.0], &[u_star.1]),
        &[spec.witness[0]],
        &[spec.witness[1]],
    )?;
    let (mut min_rho, mut min_at) = (f64::INFINITY, (f64::NAN, f64::NAN));
    for (i, &x) in field.xs.iter().enumerate() {
        for (j, &y) in field.ys.iter().enumerate() {
            if let Some(r) = field.get(i, j).filter(|&r| r < min_rho) {
                min_rho = r;
                min_at = (x, y);
            }
        }
    }
    let file = output(sink, &spec.outputs)?;
    if let Some(path) = &file {
        write_rho_csv(&field, path)?;
    }
    Ok(RhoReport {
        problem: prob.name().to_string(),
        witness: (spec.witness[0], spec.witness[1]),
        witness_rho,
        min_rho,
        min_at,
        file,
    })
}

fn audit(spec: &AuditSpec, sink: Option<&Sink>) -> Result<AuditReport> {
    let prob = builtin(&spec.problem)?;
    let p = spec.params;
    let init = SmoothedState::scalar(spec.init[0], spec.init[1], spec.init[0], spec.init[1]);
    // run the full length unless the iterate lands exactly on a GS point
    let stop = StoppingRule::new(f64::MIN_POSITIVE, spec.iterations, StopMode::Residual)?;
    let traj = run_method(&prob, &Method::Dsgda(p), &init, &stop, 1)?;
    let oracle = Oracle::new(&prob, p.r1, p.r2, OracleConfig::audit())?;
    let certs = oracle.audit(&p, &traj.states)?;
    let file = output(sink, &spec.outputs)?;
    if let Some(path) = &file {
        write_audit_csv(&certs, path)?;
    }
    Ok(AuditReport {
        problem: prob.name().to_string(),
        steps: certs.len(),
        min_margin: certs.iter().map(|c| c.margin).fold(f64::INFINITY, f64::min),
        max_phi_increase: certs
            .iter()
            .map(|c| c.phi_next - c.phi_t)
            .fold(f64::NEG_INFINITY, f64::max),
        tolerance: oracle.value_tolerance(),
        file,
    })
}
