use serde::{Deserialize, Serialize};

use super::{grid_argmax, grid_argmin, GridSpec};
use crate::analysis::{check_descent_params, check_dual_descent_params, omega0, omega1};
use crate::error::{Error, Result};
use crate::problems::{MinimaxProblem, SideCondition, SmoothedState};
use crate::solvers::AlgoParams;

/// Grids for the two kinds of one-dimensional searches.
///
/// `inner` serves the strongly convex or strongly concave subproblems
/// `min_x F` and `max_y F` (valid when `r1 > L_x` and `r2 > L_y`), where a
/// coarse lattice with deep zooming is exact up to its accuracy. `outer`
/// serves searches without such structure (over `y` in `q`, over `z` in
/// `F_low`, over `x` in `g`, over `v` in `F_up`).
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleConfig {
    pub inner: GridSpec,
    pub outer: GridSpec,
}

impl OracleConfig {
    /// Cheap grids for trajectory audits: `inner` resolves to about `1e-11`
    /// and `outer` to about `1e-5` on unit-width boxes.
    pub fn audit() -> Self {
        Self {
            inner: GridSpec {
                resolution: 21,
                levels: 10,
            },
            outer: GridSpec {
                resolution: 201,
                levels: 3,
            },
        }
    }

    /// Both grids at twice the lattice count.
    pub fn doubled(&self) -> Self {
        Self {
            inner: self.inner.doubled(),
            outer: self.outer.doubled(),
        }
    }
}

/// The saddle point `(x(z, v), y(z, v))` of `F(., ., z, v)` and its value
/// `p(z, v)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Saddle {
    pub x: f64,
    pub y: f64,
    pub p: f64,
}

/// Dual-side Lyapunov terms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DualBreakdown {
    pub h: f64,
    pub g: f64,
    pub f_upper: f64,
    /// `Psi = 2h - F - 2g + F_up`.
    pub psi: f64,
}

/// Value functions at one state and the assembled `Phi = F - 2d + 2q`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LyapunovBreakdown {
    pub f: f64,
    pub d: f64,
    pub p: f64,
    pub q: f64,
    pub f_lower: f64,
    pub phi: f64,
    pub dual: Option<DualBreakdown>,
}

impl LyapunovBreakdown {
    /// `(F - d) + (p - d) + (q - p) + (q - F_low) + F_low`.
    pub fn telescoped(&self) -> f64 {
        (self.f - self.d)
            + (self.p - self.d)
            + (self.q - self.p)
            + (self.q - self.f_lower)
            + self.f_lower
    }
}

/// Auxiliary points of the descent estimate at a state `(x, y, z, v)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AuxPoints {
    /// `proj_Y(y + alpha grad_y F(x(y, z, v), y, z, v))`.
    pub y_plus: f64,
    /// `v + mu (y(z, v) - v)`.
    pub v_plus: f64,
    /// `x(z, v)`.
    pub x_zv: f64,
    /// `argmax_v p(z, v)` over `conv(Y)`.
    pub v_of_z: f64,
}

/// Both sides of the basic descent estimate for one DS-GDA step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DescentCertificate {
    pub phi_t: f64,
    pub phi_next: f64,
    /// `Phi^t - Phi^{t+1}`.
    pub lhs: f64,
    pub rhs: f64,
    /// `lhs - rhs`.
    pub margin: f64,
    /// The five right-hand-side terms, the last one with its minus sign.
    pub terms: [f64; 5],
}

/// Dual-side mirror of [`DescentCertificate`] for `Psi`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DualDescentCertificate {
    pub psi_t: f64,
    pub psi_next: f64,
    pub lhs: f64,
    pub rhs: f64,
    pub margin: f64,
    pub terms: [f64; 5],
}

/// `|x(z, v_+(z)) - x(z, v(z))|^2` against its proximal error bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ErrorBoundCheck {
    pub lhs: f64,
    pub rhs: f64,
    pub omega: f64,
    /// `|v_+(z) - v|`.
    pub displacement: f64,
}

impl ErrorBoundCheck {
    pub fn holds(&self, tol: f64) -> bool {
        self.lhs <= self.rhs + tol
    }
}

fn require_grid_problem(prob: &MinimaxProblem) -> Result<()> {
    prob.require_value().map_err(|_| {
        Error::Unsupported(format!(
            "`{}` has no function values; oracles need f",
            prob.name()
        ))
    })?;
    if prob.dim_x() != 1 || prob.dim_y() != 1 {
        return Err(Error::Unsupported(format!(
            "grid oracles need scalar blocks; `{}` has dim_x = {}, dim_y = {}",
            prob.name(),
            prob.dim_x(),
            prob.dim_y()
        )));
    }
    Ok(())
}

/// `x*(z) = argmin_{x in X} max_{y in Y} f(x, y) + r1/2 (x - z)^2`, searched
/// with `grid` on both levels.
pub fn prox_max_argmin(prob: &MinimaxProblem, r1: f64, z: f64, grid: &GridSpec) -> Result<f64> {
    require_grid_problem(prob)?;
    grid.validate()?;
    if !(r1 > 0.0) {
        return Err(Error::InvalidParam(format!(
            "prox weight must be positive, got {r1}"
        )));
    }
    let (xl, xh) = (prob.x_set().lower()[0], prob.x_set().upper()[0]);
    let (yl, yh) = (prob.y_set().lower()[0], prob.y_set().upper()[0]);
    let pay = prob.payoff();
    let (x, _) = grid_argmin(xl, xh, grid, |x| {
        let (_, m) = grid_argmax(yl, yh, grid, |y| pay.value(&[x], &[y]).expect("checked"));
        m + 0.5 * r1 * (x - z) * (x - z)
    });
    Ok(x)
}

/// Nested grid solver for the value functions of the regularized function
/// `F(x, y, z, v) = f(x, y) + r1/2 (x - z)^2 - r2/2 (y - v)^2`.
///
/// The unbounded searches over `v` (for `q`) and `z` (for `g`) are taken over
/// `conv(Y)` and `conv(X)`. For those the maximization over `v` collapses:
/// `q(z) = max_{y in Y} min_{x in X} f(x, y) + r1/2 (x - z)^2`, attained at
/// `v(z) = y`; likewise `g(v) = min_{x in X} max_{y in Y} f(x, y) - r2/2 (y - v)^2`.
/// The literal nested forms are available as [`Oracle::q_nested`] and
/// [`Oracle::g_nested`].
#[derive(Debug, Clone)]
pub struct Oracle<'a> {
    prob: &'a MinimaxProblem,
    r1: f64,
    r2: f64,
    cfg: OracleConfig,
    x_lo: f64,
    x_hi: f64,
    y_lo: f64,
    y_hi: f64,
}

impl<'a> Oracle<'a> {
    pub fn new(prob: &'a MinimaxProblem, r1: f64, r2: f64, cfg: OracleConfig) -> Result<Self> {
        require_grid_problem(prob)?;
        cfg.inner.validate()?;
        cfg.outer.validate()?;
        if !(r1 > 0.0 && r2 > 0.0) {
            return Err(Error::InvalidParam(format!(
                "smoothing radii must be positive, got r1 = {r1}, r2 = {r2}"
            )));
        }
        Ok(Self {
            prob,
            r1,
            r2,
            cfg,
            x_lo: prob.x_set().lower()[0],
            x_hi: prob.x_set().upper()[0],
            y_lo: prob.y_set().lower()[0],
            y_hi: prob.y_set().upper()[0],
        })
    }

    pub fn problem(&self) -> &MinimaxProblem {
        self.prob
    }

    pub fn config(&self) -> &OracleConfig {
        &self.cfg
    }

    /// Tolerance for value comparisons: `L h^2` with `h` the coarsest
    /// positional accuracy, plus rounding slack.
    pub fn value_tolerance(&self) -> f64 {
        let wx = self.x_hi - self.x_lo;
        let wy = self.y_hi - self.y_lo;
        let h = self
            .cfg
            .outer
            .accuracy(wx.max(wy))
            .max(self.cfg.inner.accuracy(wx.max(wy)));
        let l = self.prob.lip_max() + self.r1.max(self.r2);
        l * h * h + 1e-12
    }

    #[inline]
    fn f(&self, x: f64, y: f64) -> f64 {
        self.prob
            .payoff()
            .value(&[x], &[y])
            .expect("checked in constructor")
    }

    /// `F(x, y, z, v)`.
    pub fn big_f(&self, x: f64, y: f64, z: f64, v: f64) -> f64 {
        self.f(x, y) + 0.5 * self.r1 * (x - z) * (x - z) - 0.5 * self.r2 * (y - v) * (y - v)
    }

    /// `(x(y, z, v), d(y, z, v))`.
    pub fn x_of(&self, y: f64, z: f64, v: f64) -> (f64, f64) {
        grid_argmin(self.x_lo, self.x_hi, &self.cfg.inner, |x| {
            self.big_f(x, y, z, v)
        })
    }

    /// `(y(x, z, v), h(x, z, v))`.
    pub fn y_of(&self, x: f64, z: f64, v: f64) -> (f64, f64) {
        grid_argmax(self.y_lo, self.y_hi, &self.cfg.inner, |y| {
            self.big_f(x, y, z, v)
        })
    }

    pub fn d(&self, y: f64, z: f64, v: f64) -> f64 {
        self.x_of(y, z, v).1
    }

    pub fn h(&self, x: f64, z: f64, v: f64) -> f64 {
        self.y_of(x, z, v).1
    }

    /// Saddle point of `F(., ., z, v)` as `argmin_x max_y`.
    pub fn saddle(&self, z: f64, v: f64) -> Saddle {
        let (x, p) = grid_argmin(self.x_lo, self.x_hi, &self.cfg.inner, |x| self.h(x, z, v));
        let (y, _) = self.y_of(x, z, v);
        Saddle { x, y, p }
    }

    pub fn p(&self, z: f64, v: f64) -> f64 {
        self.saddle(z, v).p
    }

    /// `(v(z), q(z))`.
    pub fn q(&self, z: f64) -> (f64, f64) {
        grid_argmax(self.y_lo, self.y_hi, &self.cfg.outer, |y| {
            grid_argmin(self.x_lo, self.x_hi, &self.cfg.inner, |x| {
                self.f(x, y) + 0.5 * self.r1 * (x - z) * (x - z)
            })
            .1
        })
    }

    /// `q(z)` as the literal `max_{v in conv(Y)} p(z, v)`.
    pub fn q_nested(&self, z: f64) -> (f64, f64) {
        grid_argmax(self.y_lo, self.y_hi, &self.cfg.outer, |v| self.p(z, v))
    }

    /// `(argmin, F_low)` with `F_low = min_{z in conv(X)} q(z)`.
    pub fn f_lower(&self) -> (f64, f64) {
        grid_argmin(self.x_lo, self.x_hi, &self.cfg.outer, |z| self.q(z).1)
    }

    /// `(z(v), g(v))`.
    pub fn g(&self, v: f64) -> (f64, f64) {
        grid_argmin(self.x_lo, self.x_hi, &self.cfg.outer, |x| {
            grid_argmax(self.y_lo, self.y_hi, &self.cfg.inner, |y| {
                self.f(x, y) - 0.5 * self.r2 * (y - v) * (y - v)
            })
            .1
        })
    }

    /// `g(v)` as the literal `min_{z in conv(X)} p(z, v)`.
    pub fn g_nested(&self, v: f64) -> (f64, f64) {
        grid_argmin(self.x_lo, self.x_hi, &self.cfg.outer, |z| self.p(z, v))
    }

    /// `(argmax, F_up)` with `F_up = max_{v in conv(Y)} g(v)`.
    pub fn f_upper(&self) -> (f64, f64) {
        grid_argmax(self.y_lo, self.y_hi, &self.cfg.outer, |v| self.g(v).1)
    }

    fn scalar_state(&self, s: &SmoothedState) -> Result<(f64, f64, f64, f64)> {
        self.prob.check_state(s)?;
        Ok((s.x[0], s.y[0], s.z[0], s.v[0]))
    }

    /// `Phi` without its constant `F_low`, which cancels in differences:
    /// returns `(F, d, q, v(z), Phi)`.
    fn phi_parts(&self, s: &SmoothedState) -> Result<(f64, f64, f64, f64, f64)> {
        let (x, y, z, v) = self.scalar_state(s)?;
        let big_f = self.big_f(x, y, z, v);
        let d = self.d(y, z, v);
        let (vz, q) = self.q(z);
        Ok((big_f, d, q, vz, big_f - 2.0 * d + 2.0 * q))
    }

    /// `Phi = F - 2d + 2q`.
    pub fn phi(&self, s: &SmoothedState) -> Result<f64> {
        Ok(self.phi_parts(s)?.4)
    }

    /// `Psi` without its constant `F_up`: `2h - F - 2g`.
    pub fn psi_shifted(&self, s: &SmoothedState) -> Result<f64> {
        let (x, y, z, v) = self.scalar_state(s)?;
        Ok(2.0 * self.h(x, z, v) - self.big_f(x, y, z, v) - 2.0 * self.g(v).1)
    }

    /// Every value function at `s`. `f_lower` is passed in when already
    /// known since it does not depend on the state.
    pub fn lyapunov_phi(
        &self,
        s: &SmoothedState,
        f_lower: Option<f64>,
        with_dual: bool,
    ) -> Result<LyapunovBreakdown> {
        let (x, y, z, v) = self.scalar_state(s)?;
        let big_f = self.big_f(x, y, z, v);
        let d = self.d(y, z, v);
        let p = self.p(z, v);
        let (_, q) = self.q(z);
        let f_lower = match f_lower {
            Some(f) => f,
            None => self.f_lower().1,
        };
        let dual = if with_dual {
            let h = self.h(x, z, v);
            let g = self.g(v).1;
            let f_upper = self.f_upper().1;
            Some(DualBreakdown {
                h,
                g,
                f_upper,
                psi: 2.0 * h - big_f - 2.0 * g + f_upper,
            })
        } else {
            None
        };
        Ok(LyapunovBreakdown {
            f: big_f,
            d,
            p,
            q,
            f_lower,
            phi: big_f - 2.0 * d + 2.0 * q,
            dual,
        })
    }

    fn y_plus(&self, alpha: f64, x_ref: f64, y: f64, v: f64) -> Result<f64> {
        let g = self.prob.grad_y(&[x_ref], &[y])?[0] - self.r2 * (y - v);
        Ok((y + alpha * g).clamp(self.y_lo, self.y_hi))
    }

    /// `y_+ = proj_Y(y + alpha grad_y F(x(y, z, v), y, z, v))` at the state.
    pub fn y_plus_at(&self, alpha: f64, s: &SmoothedState) -> Result<f64> {
        let (_, y, z, v) = self.scalar_state(s)?;
        let (x_ref, _) = self.x_of(y, z, v);
        self.y_plus(alpha, x_ref, y, v)
    }

    /// `y_+(z, v)`, `v_+(z)`, `x(z, v)` and `v(z)` at the state's own anchors.
    pub fn aux_points(&self, params: &AlgoParams, s: &SmoothedState) -> Result<AuxPoints> {
        let (_, y, z, v) = self.scalar_state(s)?;
        let (x_ref, _) = self.x_of(y, z, v);
        let y_plus = self.y_plus(params.alpha, x_ref, y, v)?;
        let sad = self.saddle(z, v);
        let (v_of_z, _) = self.q(z);
        Ok(AuxPoints {
            y_plus,
            v_plus: v + params.mu * (sad.y - v),
            x_zv: sad.x,
            v_of_z,
        })
    }

    fn check_radii(&self, params: &AlgoParams) -> Result<()> {
        if params.r1 != self.r1 || params.r2 != self.r2 {
            return Err(Error::InvalidParam(format!(
                "oracle radii ({}, {}) differ from parameter radii ({}, {})",
                self.r1, self.r2, params.r1, params.r2
            )));
        }
        Ok(())
    }

    /// Evaluate the basic descent estimate for `s_next = dsgda_step(s_t)`.
    pub fn descent_certificate(
        &self,
        params: &AlgoParams,
        s_t: &SmoothedState,
        s_next: &SmoothedState,
    ) -> Result<DescentCertificate> {
        self.check_radii(params)?;
        let (l, lambda) = (self.prob.lip_x(), self.prob.lambda());
        check_descent_params(l, lambda, params).into_result()?;
        let (.., phi_t) = self.phi_parts(s_t)?;
        let (.., v_of_z_next, phi_next) = self.phi_parts(s_next)?;
        self.certificate_from(params, s_t, s_next, phi_t, phi_next, v_of_z_next)
    }

    fn certificate_from(
        &self,
        params: &AlgoParams,
        s_t: &SmoothedState,
        s_next: &SmoothedState,
        phi_t: f64,
        phi_next: f64,
        v_of_z_next: f64,
    ) -> Result<DescentCertificate> {
        let (x, y, z, v) = self.scalar_state(s_t)?;
        let (x1, _, z1, _) = self.scalar_state(s_next)?;
        let (r1, r2, beta, mu) = (params.r1, params.r2, params.beta, params.mu);
        let (x_ref, _) = self.x_of(y, z, v);
        let y_plus = self.y_plus(params.alpha, x_ref, y, v)?;
        let v_plus = v + mu * (self.saddle(z1, v).y - v);
        let x_at_vz = self.saddle(z1, v_of_z_next).x;
        let x_at_vplus = self.saddle(z1, v_plus).x;
        let sq = |a: f64| a * a;
        let terms = [
            r1 / 32.0 * sq(x1 - x),
            r2 / 15.0 * sq(y - y_plus),
            r1 / (5.0 * beta) * sq(z - z1),
            r2 / (4.0 * mu) * sq(v_plus - v),
            -4.0 * r1 * beta * sq(x_at_vz - x_at_vplus),
        ];
        let lhs = phi_t - phi_next;
        let rhs: f64 = terms.iter().sum();
        Ok(DescentCertificate {
            phi_t,
            phi_next,
            lhs,
            rhs,
            margin: lhs - rhs,
            terms,
        })
    }

    /// Certificates for every consecutive pair of `states`, reusing each
    /// state's `Phi` between neighbouring steps.
    pub fn audit(
        &self,
        params: &AlgoParams,
        states: &[SmoothedState],
    ) -> Result<Vec<DescentCertificate>> {
        self.check_radii(params)?;
        check_descent_params(self.prob.lip_x(), self.prob.lambda(), params).into_result()?;
        let mut out = Vec::with_capacity(states.len().saturating_sub(1));
        let Some(first) = states.first() else {
            return Ok(out);
        };
        let (.., mut phi_prev) = self.phi_parts(first)?;
        for w in states.windows(2) {
            let (.., v_of_z, phi_next) = self.phi_parts(&w[1])?;
            out.push(self.certificate_from(params, &w[0], &w[1], phi_prev, phi_next, v_of_z)?);
            phi_prev = phi_next;
        }
        Ok(out)
    }

    /// Dual-side mirror of the descent estimate for `Psi`:
    ///
    /// ```text
    /// Psi^t - Psi^{t+1} >= r2/32 |x^t - x_+^t|^2 + r1/15 |y^t - y^{t+1}|^2
    ///   + r2/(5 mu) |v^t - v^{t+1}|^2 + r1/(4 beta) |z_+^t(v^{t+1}) - z^t|^2
    ///   - 4 r2 mu |y(z(v^{t+1}), v^{t+1}) - y(z_+^t(v^{t+1}), v^{t+1})|^2
    /// ```
    ///
    /// with `x_+(z, v) = proj_X(x - c grad_x F(x, y(x, z, v), z, v))` and
    /// `z_+(v) = z + beta (x(z, v) - z)`.
    pub fn dual_descent_certificate(
        &self,
        params: &AlgoParams,
        s_t: &SmoothedState,
        s_next: &SmoothedState,
    ) -> Result<DualDescentCertificate> {
        self.check_radii(params)?;
        check_dual_descent_params(self.prob.lip_x(), self.prob.lambda(), params).into_result()?;
        let (x, y, z, v) = self.scalar_state(s_t)?;
        let (_, y1, _, v1) = self.scalar_state(s_next)?;
        let (r1, r2, beta, mu) = (params.r1, params.r2, params.beta, params.mu);
        let psi_t = self.psi_shifted(s_t)?;
        let psi_next = self.psi_shifted(s_next)?;
        let (y_ref, _) = self.y_of(x, z, v);
        let gx = self.prob.grad_x(&[x], &[y_ref])?[0] + r1 * (x - z);
        let x_plus = (x - params.c * gx).clamp(self.x_lo, self.x_hi);
        let z_plus = z + beta * (self.saddle(z, v1).x - z);
        let (z_of_v, _) = self.g(v1);
        let sq = |a: f64| a * a;
        let terms = [
            r2 / 32.0 * sq(x - x_plus),
            r1 / 15.0 * sq(y - y1),
            r2 / (5.0 * mu) * sq(v - v1),
            r1 / (4.0 * beta) * sq(z_plus - z),
            -4.0 * r2 * mu * sq(self.saddle(z_of_v, v1).y - self.saddle(z_plus, v1).y),
        ];
        let lhs = psi_t - psi_next;
        let rhs: f64 = terms.iter().sum();
        Ok(DualDescentCertificate {
            psi_t,
            psi_next,
            lhs,
            rhs,
            margin: lhs - rhs,
            terms,
        })
    }

    /// Proximal error bound at anchors `(z, v)`:
    /// `|x(z, v_+(z)) - x(z, v(z))|^2` against `omega0 |v_+(z) - v|^(1/theta)`
    /// for a dual KL condition or `omega1 |v_+(z) - v|` for a concave dual.
    pub fn proximal_error_bound_check(
        &self,
        params: &AlgoParams,
        z: f64,
        v: f64,
    ) -> Result<ErrorBoundCheck> {
        self.check_radii(params)?;
        let cond = self.prob.regularity().dual.ok_or_else(|| {
            Error::Unsupported(format!(
                "`{}` carries no dual regularity tag",
                self.prob.name()
            ))
        })?;
        let (lx, ly) = (self.prob.lip_x(), self.prob.lip_y());
        let v_plus = v + params.mu * (self.saddle(z, v).y - v);
        let (v_of_z, _) = self.q(z);
        let lhs = (self.saddle(z, v_plus).x - self.saddle(z, v_of_z).x).powi(2);
        let disp = (v_plus - v).abs();
        let (omega, rhs) = match cond {
            SideCondition::Kl(kl) => {
                let w = omega0(lx, ly, params.r1, params.r2, params.mu, &kl)?;
                (w, w * disp.powf(1.0 / kl.theta))
            }
            SideCondition::Curvature => {
                let w = omega1(
                    lx,
                    ly,
                    params.r1,
                    params.r2,
                    params.mu,
                    self.prob.y_set().diameter(),
                )?;
                (w, w * disp)
            }
        };
        Ok(ErrorBoundCheck {
            lhs,
            rhs,
            omega,
            displacement: disp,
        })
    }
}
