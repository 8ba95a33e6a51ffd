//! DS-GDA and baseline first-order methods as deterministic iteration maps.

use serde::{Deserialize, Serialize};

use crate::analysis::Side;
use crate::error::{Error, Result};
use crate::measures::gs_pair;
use crate::problems::{inf_dist, MinimaxProblem, SmoothedState};

/// Step sizes `c`, `alpha`, averaging weights `beta`, `mu` and smoothing
/// radii `r1`, `r2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AlgoParams {
    pub c: f64,
    pub alpha: f64,
    pub beta: f64,
    pub mu: f64,
    pub r1: f64,
    pub r2: f64,
}

impl AlgoParams {
    pub fn new(c: f64, alpha: f64, beta: f64, mu: f64, r1: f64, r2: f64) -> Result<Self> {
        let p = Self {
            c,
            alpha,
            beta,
            mu,
            r1,
            r2,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("c", self.c),
            ("alpha", self.alpha),
            ("r1", self.r1),
            ("r2", self.r2),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidParam(format!(
                    "{name} must be positive and finite, got {v}"
                )));
            }
        }
        for (name, v) in [("beta", self.beta), ("mu", self.mu)] {
            if !(v > 0.0 && v <= 1.0) {
                return Err(Error::InvalidParam(format!(
                    "{name} must lie in (0, 1], got {v}"
                )));
            }
        }
        Ok(())
    }
}

/// What the stopping test compares against `tol`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StopMode {
    /// `max(|x - z|_inf, |y - v|_inf) < tol`.
    #[default]
    ProximalGap,
    /// Both game-stationarity residuals below `tol`.
    Residual,
    /// `|u^{t+1} - u^t|_inf < tol` on `u = (x, y)`; for methods without anchors.
    Step,
}

/// When to stop iterating.
///
/// Gap and step tests are vacuous before the first update (the anchors start
/// at the iterate), so at `t = 0` both fall back to the residual test.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StoppingRule {
    pub tol: f64,
    pub max_iters: u64,
    #[serde(default)]
    pub mode: StopMode,
}

impl Default for StoppingRule {
    fn default() -> Self {
        Self {
            tol: 1e-6,
            max_iters: 10_000_000,
            mode: StopMode::ProximalGap,
        }
    }
}

impl StoppingRule {
    pub fn new(tol: f64, max_iters: u64, mode: StopMode) -> Result<Self> {
        let s = Self {
            tol,
            max_iters,
            mode,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0) {
            return Err(Error::InvalidParam(format!(
                "tol must be positive, got {}",
                self.tol
            )));
        }
        if self.max_iters == 0 {
            return Err(Error::InvalidParam("max_iters must be at least 1".into()));
        }
        Ok(())
    }
}

/// How a run ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Termination {
    Converged,
    MaxIters,
}

/// Recorded iterates of a run.
///
/// With `record_every = 1` every iterate is kept, so
/// `states.len() == iterations + 1`. Larger strides keep iterates whose
/// index is a multiple of the stride, plus the final one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub iters: Vec<u64>,
    pub states: Vec<SmoothedState>,
    /// Game-stationarity residual pair of each recorded state.
    pub residuals: Vec<(f64, f64)>,
    pub termination: Termination,
    pub iterations: u64,
}

impl Trajectory {
    pub fn last(&self) -> &SmoothedState {
        self.states.last().expect("trajectories are nonempty")
    }

    pub fn final_residual(&self) -> (f64, f64) {
        *self.residuals.last().expect("trajectories are nonempty")
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }
}

/// An iteration map together with its parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "algorithm", rename_all = "kebab-case")]
pub enum Method {
    Dsgda(AlgoParams),
    /// One-sided smoothing; see [`sgda_step`].
    Sgda {
        params: AlgoParams,
        side: Side,
    },
    Gda {
        c: f64,
        alpha: f64,
    },
    Eg {
        step: f64,
    },
}

impl Method {
    pub fn validate(&self) -> Result<()> {
        match self {
            Method::Dsgda(p) | Method::Sgda { params: p, .. } => p.validate(),
            Method::Gda { c, alpha } => {
                if *c > 0.0 && *alpha > 0.0 && c.is_finite() && alpha.is_finite() {
                    Ok(())
                } else {
                    Err(Error::InvalidParam(format!(
                        "GDA step sizes must be positive and finite, got c = {c}, alpha = {alpha}"
                    )))
                }
            }
            Method::Eg { step } => {
                if *step > 0.0 && step.is_finite() {
                    Ok(())
                } else {
                    Err(Error::InvalidParam(format!(
                        "extragradient step must be positive and finite, got {step}"
                    )))
                }
            }
        }
    }

    /// One iteration. The caller guarantees matching dimensions.
    pub fn step(&self, prob: &MinimaxProblem, s: &SmoothedState) -> SmoothedState {
        let mut out = s.clone();
        match *self {
            Method::Dsgda(p) => {
                smoothed_update(prob, p.c, p.alpha, p.beta, p.mu, p.r1, p.r2, s, &mut out)
            }
            Method::Sgda { params: p, side } => {
                let (beta, mu, r1, r2) = one_sided(&p, side);
                smoothed_update(prob, p.c, p.alpha, beta, mu, r1, r2, s, &mut out)
            }
            Method::Gda { c, alpha } => {
                smoothed_update(prob, c, alpha, 0.0, 0.0, 0.0, 0.0, s, &mut out)
            }
            Method::Eg { step } => extragradient(prob, step, s, &mut out),
        }
        out
    }

    /// Natural stopping test: gap for smoothed methods, step otherwise.
    pub fn default_stop_mode(&self) -> StopMode {
        match self {
            Method::Dsgda(_) | Method::Sgda { .. } => StopMode::ProximalGap,
            Method::Gda { .. } | Method::Eg { .. } => StopMode::Step,
        }
    }
}

fn one_sided(p: &AlgoParams, side: Side) -> (f64, f64, f64, f64) {
    match side {
        // v tracks y: v+ = y+
        Side::Primal => (p.beta, 1.0, p.r1, 0.0),
        // z tracks x: z+ = x+
        Side::Dual => (1.0, p.mu, 0.0, p.r2),
    }
}

#[allow(clippy::too_many_arguments)]
fn smoothed_update(
    prob: &MinimaxProblem,
    c: f64,
    alpha: f64,
    beta: f64,
    mu: f64,
    r1: f64,
    r2: f64,
    s: &SmoothedState,
    out: &mut SmoothedState,
) {
    let pay = prob.payoff();
    pay.grad_x(&s.x, &s.y, &mut out.x);
    for i in 0..s.x.len() {
        out.x[i] = s.x[i] - c * (out.x[i] + r1 * (s.x[i] - s.z[i]));
    }
    prob.x_set().project_in_place(&mut out.x);
    // Gauss-Seidel: the y-step sees the new x
    pay.grad_y(&out.x, &s.y, &mut out.y);
    for j in 0..s.y.len() {
        out.y[j] = s.y[j] + alpha * (out.y[j] - r2 * (s.y[j] - s.v[j]));
    }
    prob.y_set().project_in_place(&mut out.y);
    for i in 0..s.z.len() {
        out.z[i] = s.z[i] + beta * (out.x[i] - s.z[i]);
    }
    for j in 0..s.v.len() {
        out.v[j] = s.v[j] + mu * (out.y[j] - s.v[j]);
    }
}

fn extragradient(prob: &MinimaxProblem, step: f64, s: &SmoothedState, out: &mut SmoothedState) {
    let pay = prob.payoff();
    let mut gx = vec![0.0; s.x.len()];
    let mut gy = vec![0.0; s.y.len()];
    pay.grad_x(&s.x, &s.y, &mut gx);
    pay.grad_y(&s.x, &s.y, &mut gy);
    let mut xb: Vec<f64> = s.x.iter().zip(&gx).map(|(x, g)| x - step * g).collect();
    let mut yb: Vec<f64> = s.y.iter().zip(&gy).map(|(y, g)| y + step * g).collect();
    prob.x_set().project_in_place(&mut xb);
    prob.y_set().project_in_place(&mut yb);
    pay.grad_x(&xb, &yb, &mut gx);
    pay.grad_y(&xb, &yb, &mut gy);
    for ((o, x), g) in out.x.iter_mut().zip(&s.x).zip(&gx) {
        *o = x - step * g;
    }
    for ((o, y), g) in out.y.iter_mut().zip(&s.y).zip(&gy) {
        *o = y + step * g;
    }
    prob.x_set().project_in_place(&mut out.x);
    prob.y_set().project_in_place(&mut out.y);
}

fn check_input(prob: &MinimaxProblem, s: &SmoothedState) -> Result<()> {
    prob.check_state(s)?;
    prob.check_feasible(&s.x, &s.y)
}

/// One DS-GDA iteration:
///
/// ```text
/// x+ = proj_X(x - c grad_x F(x, y, z, v))
/// y+ = proj_Y(y + alpha grad_y F(x+, y, z, v))
/// z+ = z + beta (x+ - z)
/// v+ = v + mu (y+ - v)
/// ```
pub fn dsgda_step(
    prob: &MinimaxProblem,
    params: &AlgoParams,
    s: &SmoothedState,
) -> Result<SmoothedState> {
    check_input(prob, s)?;
    params.validate()?;
    Ok(Method::Dsgda(*params).step(prob, s))
}

/// Smoothed GDA with a single proximal term. The primal side runs DS-GDA
/// with `r2 = 0` and `v+ = y+`; the dual side with `r1 = 0` and `z+ = x+`.
pub fn sgda_step(
    prob: &MinimaxProblem,
    params: &AlgoParams,
    s: &SmoothedState,
    side: Side,
) -> Result<SmoothedState> {
    check_input(prob, s)?;
    params.validate()?;
    Ok(Method::Sgda {
        params: *params,
        side,
    }
    .step(prob, s))
}

/// Projected GDA with the new `x` in the `y`-step; `z`, `v` are carried.
pub fn gda_step(
    prob: &MinimaxProblem,
    c: f64,
    alpha: f64,
    s: &SmoothedState,
) -> Result<SmoothedState> {
    check_input(prob, s)?;
    let m = Method::Gda { c, alpha };
    m.validate()?;
    Ok(m.step(prob, s))
}

/// Projected extragradient on `G = [grad_x f; -grad_y f]`; `z`, `v` are
/// carried.
pub fn eg_step(prob: &MinimaxProblem, stepsize: f64, s: &SmoothedState) -> Result<SmoothedState> {
    check_input(prob, s)?;
    let m = Method::Eg { step: stepsize };
    m.validate()?;
    Ok(m.step(prob, s))
}

/// Run DS-GDA from `init` recording every iterate.
pub fn run(
    prob: &MinimaxProblem,
    params: &AlgoParams,
    init: &SmoothedState,
    stop: &StoppingRule,
) -> Result<Trajectory> {
    run_method(prob, &Method::Dsgda(*params), init, stop, 1)
}

fn stop_test(
    mode: StopMode,
    tol: f64,
    prev: &SmoothedState,
    cur: &SmoothedState,
    res: (f64, f64),
) -> bool {
    match mode {
        StopMode::ProximalGap => cur.proximal_gap() < tol,
        StopMode::Residual => res.0 < tol && res.1 < tol,
        StopMode::Step => inf_dist(&prev.x, &cur.x).max(inf_dist(&prev.y, &cur.y)) < tol,
    }
}

/// Iterate `method` until `stop` fires, keeping every `record_every`-th
/// iterate. Errors with the iterate index on the first non-finite value.
pub fn run_method(
    prob: &MinimaxProblem,
    method: &Method,
    init: &SmoothedState,
    stop: &StoppingRule,
    record_every: u64,
) -> Result<Trajectory> {
    check_input(prob, init)?;
    method.validate()?;
    stop.validate()?;
    if record_every == 0 {
        return Err(Error::InvalidParam(
            "record stride must be at least 1".into(),
        ));
    }
    let mut cur = init.clone();
    let res0 = gs_pair(prob, &cur.x, &cur.y);
    let mut traj = Trajectory {
        iters: vec![0],
        states: vec![cur.clone()],
        residuals: vec![res0],
        termination: Termination::MaxIters,
        iterations: 0,
    };
    if res0.0 < stop.tol && res0.1 < stop.tol {
        traj.termination = Termination::Converged;
        return Ok(traj);
    }
    let needs_residual = stop.mode == StopMode::Residual;
    for t in 1..=stop.max_iters {
        let next = method.step(prob, &cur);
        if !next.is_finite() {
            return Err(Error::NonFinite { iter: t as usize });
        }
        let recorded = t % record_every == 0;
        let res = if needs_residual || recorded {
            gs_pair(prob, &next.x, &next.y)
        } else {
            (f64::NAN, f64::NAN)
        };
        let done = stop_test(stop.mode, stop.tol, &cur, &next, res);
        cur = next;
        if recorded || done || t == stop.max_iters {
            let res = if res.0.is_nan() {
                gs_pair(prob, &cur.x, &cur.y)
            } else {
                res
            };
            traj.iters.push(t);
            traj.states.push(cur.clone());
            traj.residuals.push(res);
        }
        if done {
            traj.termination = Termination::Converged;
            traj.iterations = t;
            return Ok(traj);
        }
    }
    traj.iterations = stop.max_iters;
    Ok(traj)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::builtin;

    fn params(c: f64, alpha: f64, beta: f64, mu: f64, r1: f64, r2: f64) -> AlgoParams {
        AlgoParams::new(c, alpha, beta, mu, r1, r2).unwrap()
    }

    #[test]
    fn toy_step_by_hand() {
        let p = builtin("toy_bilinear").unwrap();
        let s = SmoothedState::scalar(1.0, 1.0, 1.0, 1.0);
        let n = dsgda_step(&p, &params(0.1, 0.1, 0.5, 0.5, 1.0, 1.0), &s).unwrap();
        assert!((n.x[0] - 0.9).abs() < 1e-15);
        assert_eq!(n.y[0], 1.0);
        assert!((n.z[0] - 0.95).abs() < 1e-15);
        assert_eq!(n.v[0], 1.0);
    }

    #[test]
    fn origin_is_fixed() {
        let p = builtin("kl_nonconcave").unwrap();
        let s = SmoothedState::scalar(0.0, 0.0, 0.0, 0.0);
        let n = dsgda_step(&p, &params(0.04, 0.04, 0.8, 0.8, 0.125, 0.125), &s).unwrap();
        assert_eq!(n, s);
    }

    #[test]
    fn infeasible_input_is_rejected() {
        let p = builtin("toy_bilinear").unwrap();
        let s = SmoothedState::scalar(2.0, 0.0, 0.0, 0.0);
        assert!(matches!(
            dsgda_step(&p, &params(0.1, 0.1, 0.5, 0.5, 1.0, 1.0), &s),
            Err(Error::Infeasible(_))
        ));
    }

    #[test]
    fn primal_sgda_reduction() {
        let p = builtin("forsaken").unwrap();
        let s = SmoothedState::scalar(0.3, -0.2, 0.1, -0.2);
        let a = sgda_step(
            &p,
            &params(0.05, 0.05, 0.3, 0.7, 2.0, 2.0),
            &s,
            Side::Primal,
        )
        .unwrap();
        // DS-GDA with r2 = 0 and v = y, mu = 1
        let mut q = params(0.05, 0.05, 0.3, 1.0, 2.0, 1.0);
        q.r2 = 0.0;
        let b = Method::Dsgda(q).step(&p, &s);
        assert_eq!(a, b);
        assert_eq!(a.v, a.y);
    }

    #[test]
    fn gda_reduction() {
        let p = builtin("forsaken").unwrap();
        let s = SmoothedState::scalar(0.3, -0.2, 0.3, -0.2);
        let a = gda_step(&p, 0.05, 0.07, &s).unwrap();
        let b = Method::Dsgda(AlgoParams {
            c: 0.05,
            alpha: 0.07,
            beta: 0.0,
            mu: 0.0,
            r1: 0.0,
            r2: 0.0,
        })
        .step(&p, &s);
        assert_eq!(a, b);
        assert_eq!((a.z.clone(), a.v.clone()), (s.z.clone(), s.v.clone()));
    }

    #[test]
    fn eg_by_hand() {
        let p = builtin("toy_bilinear").unwrap();
        let s = SmoothedState::scalar(1.0, 1.0, 1.0, 1.0);
        let n = eg_step(&p, 0.1, &s).unwrap();
        // half step (0.9, 1), then x = 1 - 0.1 * 1, y = 1 + 0.1 * 0.9 -> clamp
        assert!((n.x[0] - 0.9).abs() < 1e-15);
        assert_eq!(n.y[0], 1.0);
    }

    #[test]
    fn toy_from_origin_converges_immediately() {
        let p = builtin("toy_bilinear").unwrap();
        let t = run(
            &p,
            &params(0.1, 0.1, 0.5, 0.5, 1.0, 1.0),
            &SmoothedState::scalar(0.0, 0.0, 0.0, 0.0),
            &StoppingRule::default(),
        )
        .unwrap();
        assert_eq!(t.iterations, 0);
        assert_eq!(t.termination, Termination::Converged);
        assert_eq!(t.states.len(), 1);
    }

    #[test]
    fn kl_universal_converges() {
        let p = builtin("kl_nonconcave").unwrap();
        let t = run(
            &p,
            &params(0.04, 0.04, 0.8, 0.8, 0.125, 0.125),
            &SmoothedState::from_xy(vec![0.5], vec![-0.5]),
            &StoppingRule::new(1e-6, 1_000_000, StopMode::ProximalGap).unwrap(),
        )
        .unwrap();
        assert_eq!(t.termination, Termination::Converged);
        let s = t.last();
        assert!(s.x[0].hypot(s.y[0]) < 1e-3);
        assert_eq!(t.states.len() as u64, t.iterations + 1);
    }

    #[test]
    fn runs_are_bit_reproducible() {
        let p = builtin("forsaken").unwrap();
        let pr = params(0.01, 0.01, 0.1, 0.1, 5.0, 5.0);
        let init = SmoothedState::from_xy(vec![-1.0], vec![1.2]);
        let stop = StoppingRule::new(1e-8, 2000, StopMode::ProximalGap).unwrap();
        let a = run(&p, &pr, &init, &stop).unwrap();
        let b = run(&p, &pr, &init, &stop).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn stride_keeps_final_state() {
        let p = builtin("forsaken").unwrap();
        let m = Method::Gda {
            c: 0.01,
            alpha: 0.01,
        };
        let stop = StoppingRule::new(1e-12, 95, StopMode::Step).unwrap();
        let t = run_method(
            &p,
            &m,
            &SmoothedState::from_xy(vec![-1.0], vec![1.2]),
            &stop,
            10,
        )
        .unwrap();
        assert_eq!(t.iters.first(), Some(&0));
        assert_eq!(t.iters.last(), Some(&95));
        assert_eq!(t.iters.len(), 11);
    }

    #[test]
    fn non_finite_is_reported() {
        use crate::problems::{BoxSet, Payoff};
        use std::sync::Arc;
        #[derive(Debug)]
        struct Blow;
        impl Payoff for Blow {
            fn value(&self, _: &[f64], _: &[f64]) -> Option<f64> {
                Some(0.0)
            }
            fn grad_x(&self, x: &[f64], _: &[f64], out: &mut [f64]) {
                out[0] = if x[0] < 0.5 { f64::NAN } else { 1.0 };
            }
            fn grad_y(&self, _: &[f64], _: &[f64], out: &mut [f64]) {
                out[0] = 0.0;
            }
        }
        let b = BoxSet::cube(-1.0, 1.0, 1).unwrap();
        let p = MinimaxProblem::new("blow", b.clone(), b, Arc::new(Blow), 1.0, 1.0).unwrap();
        let m = Method::Gda { c: 0.3, alpha: 0.1 };
        let e = run_method(
            &p,
            &m,
            &SmoothedState::from_xy(vec![1.0], vec![0.0]),
            &StoppingRule::default(),
            1,
        )
        .unwrap_err();
        assert!(matches!(e, Error::NonFinite { iter: 3 }), "{e}");
    }
}
