//! Stationarity residuals, trajectory outcome classification and the
//! residual-bound certificates.

use serde::{Deserialize, Serialize};

use crate::analysis::{constants, omega2_dual_eb, KlSpec};
use crate::error::{Error, Result};
use crate::oracle::{prox_max_argmin, GridSpec, Oracle};
use crate::problems::{dist, BoxSet, MinimaxProblem, SmoothedState};
use crate::solvers::{AlgoParams, Trajectory};

/// Normal-cone distance of `-g` at `p`, coordinatewise on a box, in the
/// Euclidean norm.
fn box_residual(set: &BoxSet, p: &[f64], g: &[f64]) -> f64 {
    let (lo, hi) = (set.lower(), set.upper());
    let mut acc = 0.0;
    for i in 0..p.len() {
        let r = if lo[i] == hi[i] {
            0.0
        } else if p[i] <= lo[i] {
            (-g[i]).max(0.0)
        } else if p[i] >= hi[i] {
            g[i].max(0.0)
        } else {
            g[i].abs()
        };
        acc += r * r;
    }
    acc.sqrt()
}

/// Residual pair without validation. Callers guarantee dimensions.
pub(crate) fn gs_pair(prob: &MinimaxProblem, x: &[f64], y: &[f64]) -> (f64, f64) {
    let pay = prob.payoff();
    let mut gx = vec![0.0; x.len()];
    let mut gy = vec![0.0; y.len()];
    pay.grad_x(x, y, &mut gx);
    pay.grad_y(x, y, &mut gy);
    for g in gy.iter_mut() {
        *g = -*g;
    }
    (
        box_residual(prob.x_set(), x, &gx),
        box_residual(prob.y_set(), y, &gy),
    )
}

/// Game-stationarity residuals `(gs_x, gs_y)`: distance from zero to
/// `grad_x f + N_X(x)` and to `-grad_y f + N_Y(y)`.
pub fn gs_residual(prob: &MinimaxProblem, x: &[f64], y: &[f64]) -> Result<(f64, f64)> {
    prob.check_point(x, y)?;
    prob.check_feasible(x, y)?;
    Ok(gs_pair(prob, x, y))
}

/// `|x*(x_hat) - x_hat|` with `x*` the proximal point of `max_y f(., y)`
/// over `X`. Accurate to the grid's positional accuracy on `X`.
pub fn os_residual(prob: &MinimaxProblem, r1: f64, x_hat: f64, grid: &GridSpec) -> Result<f64> {
    if !prob.has_value() {
        return Err(Error::Unsupported(format!(
            "`{}` is gradient-only; the OS residual needs f",
            prob.name()
        )));
    }
    prob.check_feasible(&[x_hat], prob.y_set().lower())?;
    Ok((prox_max_argmin(prob, r1, x_hat, grid)? - x_hat).abs())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StationarityReport {
    pub gs_x: f64,
    pub gs_y: f64,
    pub os: Option<f64>,
    pub at: (Vec<f64>, Vec<f64>),
}

impl StationarityReport {
    /// GS residuals, plus the OS residual when `os = Some((r1, grid))`.
    pub fn evaluate(
        prob: &MinimaxProblem,
        x: &[f64],
        y: &[f64],
        os: Option<(f64, &GridSpec)>,
    ) -> Result<Self> {
        let (gs_x, gs_y) = gs_residual(prob, x, y)?;
        let os = match os {
            Some((r1, grid)) => {
                if x.len() != 1 {
                    return Err(Error::Unsupported("the OS residual needs scalar x".into()));
                }
                Some(os_residual(prob, r1, x[0], grid)?)
            }
            None => None,
        };
        Ok(Self {
            gs_x,
            gs_y,
            os,
            at: (x.to_vec(), y.to_vec()),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OutcomeKind {
    Converged,
    LimitCycle,
    BoundaryStall,
    MaxIters,
}

impl std::fmt::Display for OutcomeKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            OutcomeKind::Converged => "converged",
            OutcomeKind::LimitCycle => "limit-cycle",
            OutcomeKind::BoundaryStall => "boundary-stall",
            OutcomeKind::MaxIters => "max-iters",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutcomeClass {
    pub kind: OutcomeKind,
    /// Iterations between the matched pair of states, for limit cycles.
    pub loop_length: Option<u64>,
    /// Distance between the matched pair of states, for limit cycles.
    pub recurrence_distance: Option<f64>,
    pub final_residual: (f64, f64),
}

/// Detector constants. `burn_in = None` means a tenth of the run length.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassifyOpts {
    pub eps_stat: f64,
    pub delta_rec: f64,
    #[serde(default)]
    pub burn_in: Option<u64>,
    pub min_loop: u64,
}

impl Default for ClassifyOpts {
    fn default() -> Self {
        Self {
            eps_stat: 1e-4,
            delta_rec: 1e-3,
            burn_in: None,
            min_loop: 10,
        }
    }
}

/// Number of trailing recorded states tried as the end of a loop.
const RECUR_PROBES: usize = 20;

/// Largest move between the last two recorded states counted as a stall.
const STALL_TOL: f64 = 1e-12;

fn xy_dist(a: &SmoothedState, b: &SmoothedState) -> f64 {
    dist(&a.x, &b.x).hypot(dist(&a.y, &b.y))
}

/// Label a trajectory. Without the problem's boxes a stall is any frozen
/// non-stationary tail; [`classify_in`] also requires it to sit on the boundary.
///
/// A limit cycle needs a late state `b` and an earlier post-burn-in state `a`
/// with `|b - a| <= delta_rec`, at least `min_loop` iterations apart, such
/// that the path between them leaves the `10 delta_rec` ball around `a` and
/// no state on it is stationary. The excursion requirement separates orbits
/// from slow drift.
pub fn classify(traj: &Trajectory, opts: &ClassifyOpts) -> OutcomeClass {
    let fin = traj.final_residual();
    let mut out = OutcomeClass {
        kind: OutcomeKind::MaxIters,
        loop_length: None,
        recurrence_distance: None,
        final_residual: fin,
    };
    if fin.0 < opts.eps_stat && fin.1 < opts.eps_stat {
        out.kind = OutcomeKind::Converged;
        return out;
    }
    let burn = opts.burn_in.unwrap_or(traj.iterations / 10);
    let n = traj.states.len();
    let start = traj.iters.partition_point(|&t| t < burn);
    for b in (start..n).rev().take(RECUR_PROBES) {
        let tb = traj.iters[b];
        let sb = &traj.states[b];
        let mut far = false;
        let mut stationary = false;
        for a in (start..b).rev() {
            let sa = &traj.states[a];
            let ra = traj.residuals[a];
            if ra.0 < opts.eps_stat && ra.1 < opts.eps_stat {
                stationary = true;
            }
            if stationary {
                break;
            }
            let d = xy_dist(sa, sb);
            if d > 10.0 * opts.delta_rec {
                far = true;
            }
            if far && tb - traj.iters[a] >= opts.min_loop && d <= opts.delta_rec {
                // the excursion must leave the ball around a as well
                let left = (a + 1..b).any(|k| xy_dist(&traj.states[k], sa) > 10.0 * opts.delta_rec);
                if left {
                    out.kind = OutcomeKind::LimitCycle;
                    out.loop_length = Some(tb - traj.iters[a]);
                    out.recurrence_distance = Some(d);
                    return out;
                }
            }
        }
    }
    if n >= 2 {
        let (p, q) = (&traj.states[n - 2], &traj.states[n - 1]);
        if traj.iters[n - 1] >= burn && xy_dist(p, q) <= STALL_TOL {
            out.kind = OutcomeKind::BoundaryStall;
        }
    }
    out
}

/// [`classify`] with the boundary-stall test against the problem's boxes.
pub fn classify_in(prob: &MinimaxProblem, traj: &Trajectory, opts: &ClassifyOpts) -> OutcomeClass {
    let mut out = classify(traj, opts);
    if out.kind == OutcomeKind::BoundaryStall {
        let q = traj.last();
        if !(prob.x_set().on_boundary(&q.x) || prob.y_set().on_boundary(&q.y)) {
            out.kind = OutcomeKind::MaxIters;
        }
    }
    out
}

/// Certificate that `(x^{t+1}, y^{t+1})` is a `rho eps` GS point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GsBoundCheck {
    pub gs: (f64, f64),
    pub rho: (f64, f64),
    /// `max(|dx|/c, |y - y_+|/alpha, |dz|/beta, |dv|/mu)`.
    pub eps: f64,
    /// `max(gs_x / (rho_x eps), gs_y / (rho_y eps))` with `0/0 = 0`.
    pub ratio: f64,
}

impl GsBoundCheck {
    pub fn holds(&self) -> bool {
        self.ratio <= 1.0
    }
}

fn safe_ratio(num: f64, den: f64) -> f64 {
    if num == 0.0 {
        0.0
    } else {
        num / den
    }
}

/// `rho_x = c (1/c + L_x + r1 + L_x L_y alpha sigma6) + r1 + L_x alpha` and
/// `rho_y = alpha (1/alpha + L_y + r2) + (1/alpha + L_y + r2) L_y alpha sigma6 c + r2`.
pub fn gs_bound_rho(prob: &MinimaxProblem, p: &AlgoParams) -> Result<(f64, f64)> {
    let (lx, ly) = (prob.lip_x(), prob.lip_y());
    let k = constants(lx, ly, p.r1, p.r2, p.c, p.alpha)?;
    let s6 = k.sigma6;
    let rho_x = p.c * (1.0 / p.c + lx + p.r1 + lx * ly * p.alpha * s6) + p.r1 + lx * p.alpha;
    let a = 1.0 / p.alpha + ly + p.r2;
    let rho_y = p.alpha * a + a * ly * p.alpha * s6 * p.c + p.r2;
    Ok((rho_x, rho_y))
}

/// Check the GS bound for one DS-GDA step `s_t -> s_next`.
pub fn gs_bound_check(
    oracle: &Oracle<'_>,
    params: &AlgoParams,
    s_t: &SmoothedState,
    s_next: &SmoothedState,
) -> Result<GsBoundCheck> {
    let prob = oracle.problem();
    prob.check_state(s_t)?;
    prob.check_state(s_next)?;
    let rho = gs_bound_rho(prob, params)?;
    let y_plus = oracle.y_plus_at(params.alpha, s_t)?;
    let eps = [
        dist(&s_t.x, &s_next.x) / params.c,
        (s_t.y[0] - y_plus).abs() / params.alpha,
        dist(&s_t.z, &s_next.z) / params.beta,
        dist(&s_t.v, &s_next.v) / params.mu,
    ]
    .into_iter()
    .fold(0.0, f64::max);
    let gs = gs_residual(prob, &s_next.x, &s_next.y)?;
    let ratio = safe_ratio(gs.0, rho.0 * eps).max(safe_ratio(gs.1, rho.1 * eps));
    Ok(GsBoundCheck {
        gs,
        rho,
        eps,
        ratio,
    })
}

/// OS residual versus its GS-type upper bound at a point `(x, y)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OsBoundCheck {
    pub lhs: f64,
    pub rhs: f64,
    /// Oracle positional accuracy, the slack allowed on `lhs`.
    pub tolerance: f64,
}

impl OsBoundCheck {
    pub fn holds(&self) -> bool {
        self.lhs <= self.rhs + self.tolerance
    }
}

/// Bound the OS residual at `x` by the displacements of the proximal maps
/// anchored at `(z, v) = (x, y)`:
///
/// ```text
/// |x*(x) - x| <= s8 s1 (2 + a Ly + a r2) |y - y(x,x,y)| + (Ly a s8 s1 + 1) |x - x(y,x,y)|
///                + sqrt(w2) (Ly a s8 |x - x(y,x,y)| + (2 + a Ly + a r2) s8 |y - y(x,x,y)|)^(1/(2 theta))
/// ```
///
/// `kl` is the dual-side KL data of the problem.
pub fn os_bound_check(
    oracle: &Oracle<'_>,
    params: &AlgoParams,
    kl: &KlSpec,
    x: f64,
    y: f64,
) -> Result<OsBoundCheck> {
    let prob = oracle.problem();
    prob.check_feasible(&[x], &[y])?;
    let (lx, ly) = (prob.lip_x(), prob.lip_y());
    let (r1, r2, a) = (params.r1, params.r2, params.alpha);
    let k = constants(lx, ly, r1, r2, params.c, a)?;
    let w2 = omega2_dual_eb(lx, r1, r2, kl)?;
    let grid = oracle.config().inner;
    let lhs = os_residual(prob, r1, x, &grid)?;
    let (xm, _) = oracle.x_of(y, x, y);
    let (ym, _) = oracle.y_of(x, x, y);
    let dx = (x - xm).abs();
    let dy = (y - ym).abs();
    let b = 2.0 + a * ly + a * r2;
    let inner = ly * a * k.sigma8 * dx + b * k.sigma8 * dy;
    let rhs = k.sigma8 * k.sigma1 * b * dy
        + (ly * a * k.sigma8 * k.sigma1 + 1.0) * dx
        + w2.sqrt() * inner.powf(1.0 / (2.0 * kl.theta));
    let wx = prob.x_set().upper()[0] - prob.x_set().lower()[0];
    Ok(OsBoundCheck {
        lhs,
        rhs,
        tolerance: grid.accuracy(wx),
    })
}
