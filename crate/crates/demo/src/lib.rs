//! Browser demo bindings.
//!
//! Every export takes plain numbers and strings and returns a JSON document,
//! so the page needs no generated TypeScript glue beyond `wasm-bindgen`'s.
//! The `*_json` functions are the native entry points; the exported
//! wrappers only turn their errors into JS exceptions.

use dsgda::analysis::{feasibility_scan, universal_params, RhoField};
use dsgda::measures::{classify_in, ClassifyOpts};
use dsgda::problems::{registry_names, Builtin};
use dsgda::solvers::{run_method, AlgoParams, Method, StopMode, StoppingRule};
use dsgda::SmoothedState;
use serde::Serialize;
use wasm_bindgen::prelude::*;

const MAX_POINTS: usize = 4000;

#[derive(Debug, Clone, Serialize)]
pub struct TrajectoryView {
    pub problem: String,
    pub bounds: [f64; 4],
    /// `(x, y)` of recorded iterates, thinned to at most 4000.
    pub points: Vec<[f64; 2]>,
    pub outcome: String,
    pub iterations: u64,
    pub final_residual: (f64, f64),
}

#[derive(Debug, Clone, Serialize)]
pub struct FeasibilityView {
    pub t1: Vec<f64>,
    pub t2: Vec<f64>,
    /// Row-major over `t1`.
    pub feasible: Vec<bool>,
    pub count: usize,
    pub universal: Option<(f64, f64)>,
}

#[derive(Debug, Clone, Serialize)]
pub struct RhoView {
    pub problem: String,
    pub xs: Vec<f64>,
    pub ys: Vec<f64>,
    /// Row-major over `xs`; `null` where the field vanishes.
    pub rho: Vec<Option<f64>>,
    pub threshold: f64,
}

fn method(algorithm: &str, p: [f64; 6]) -> Result<Method, String> {
    let [c, alpha, beta, mu, r1, r2] = p;
    let m = match algorithm {
        "dsgda" => {
            Method::Dsgda(AlgoParams::new(c, alpha, beta, mu, r1, r2).map_err(|e| e.to_string())?)
        }
        "gda" => Method::Gda { c, alpha },
        "eg" => Method::Eg { step: c },
        other => return Err(format!("unknown algorithm `{other}`; use dsgda, gda or eg")),
    };
    m.validate().map_err(|e| e.to_string())?;
    Ok(m)
}

fn to_json<T: Serialize>(v: &T) -> Result<String, String> {
    serde_json::to_string(v).map_err(|e| e.to_string())
}

/// Names accepted by the other calls.
pub fn problems_json() -> String {
    let names: Vec<String> = registry_names()
        .iter()
        .map(|n| n.replace("(A)", "(10)"))
        .collect();
    serde_json::to_string(&names).unwrap_or_else(|_| "[]".into())
}

/// Run `algorithm` from `(x0, y0)` with anchors at the start. `eg` reads its
/// step from `c`; `gda` ignores the smoothing parameters.
#[allow(clippy::too_many_arguments)]
pub fn trajectory_json(
    problem: &str,
    algorithm: &str,
    x0: f64,
    y0: f64,
    params: [f64; 6],
    tol: f64,
    max_iters: u32,
) -> Result<String, String> {
    let prob = Builtin::parse(problem)
        .map_err(|e| e.to_string())?
        .problem();
    let m = method(algorithm, params)?;
    let stop =
        StoppingRule::new(tol, max_iters.into(), StopMode::Residual).map_err(|e| e.to_string())?;
    let every = (u64::from(max_iters) / MAX_POINTS as u64).max(1);
    let init = SmoothedState::scalar(x0, y0, x0, y0);
    let traj = run_method(&prob, &m, &init, &stop, every).map_err(|e| e.to_string())?;
    let outcome = classify_in(&prob, &traj, &ClassifyOpts::default());
    let (xs, ys) = (prob.x_set(), prob.y_set());
    to_json(&TrajectoryView {
        problem: prob.name().to_string(),
        bounds: [xs.lower()[0], xs.upper()[0], ys.lower()[0], ys.upper()[0]],
        points: traj.states.iter().map(|s| [s.x[0], s.y[0]]).collect(),
        outcome: outcome.kind.to_string(),
        iterations: traj.iterations,
        final_residual: traj.final_residual(),
    })
}

pub fn feasibility_json(
    l: f64,
    beta: f64,
    mu: f64,
    t_max: f64,
    steps: usize,
) -> Result<String, String> {
    if t_max.is_nan() || t_max <= 0.0 || !(2..=401).contains(&steps) {
        return Err("need t_max > 0 and 2 <= steps <= 401".into());
    }
    let scan = feasibility_scan(l, beta, mu, (0.0, t_max), (0.0, t_max), steps);
    let universal = universal_params(l)
        .ok()
        .map(|u| (1.0 / (u.c * u.r1), u.r1 / l));
    to_json(&FeasibilityView {
        count: scan.count_feasible(),
        feasible: scan.feasible.concat(),
        t1: scan.t1,
        t2: scan.t2,
        universal,
    })
}

/// `rho` around the problem's reference stationary point.
pub fn rho_json(problem: &str, resolution: usize) -> Result<String, String> {
    if !(3..=301).contains(&resolution) {
        return Err("resolution must lie in 3..=301".into());
    }
    let b = Builtin::parse(problem).map_err(|e| e.to_string())?;
    let prob = b.problem();
    let field =
        RhoField::sample(&prob, b.stationary_point(), resolution).map_err(|e| e.to_string())?;
    to_json(&RhoView {
        problem: prob.name().to_string(),
        threshold: -1.0 / (2.0 * prob.lip_max()),
        xs: field.xs,
        ys: field.ys,
        rho: field.rho,
    })
}

#[wasm_bindgen]
pub fn problems() -> String {
    problems_json()
}

#[wasm_bindgen]
#[allow(clippy::too_many_arguments)]
pub fn trajectory(
    problem: &str,
    algorithm: &str,
    x0: f64,
    y0: f64,
    c: f64,
    alpha: f64,
    beta: f64,
    mu: f64,
    r1: f64,
    r2: f64,
    tol: f64,
    max_iters: u32,
) -> Result<String, JsError> {
    trajectory_json(
        problem,
        algorithm,
        x0,
        y0,
        [c, alpha, beta, mu, r1, r2],
        tol,
        max_iters,
    )
    .map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn feasibility(
    l: f64,
    beta: f64,
    mu: f64,
    t_max: f64,
    steps: usize,
) -> Result<String, JsError> {
    feasibility_json(l, beta, mu, t_max, steps).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn rho_field(problem: &str, resolution: usize) -> Result<String, JsError> {
    rho_json(problem, resolution).map_err(|e| JsError::new(&e))
}
