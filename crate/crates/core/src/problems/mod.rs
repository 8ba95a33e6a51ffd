//! Minimax problem abstraction, box projections and the regularized
//! function `F`.

mod builtins;

use std::fmt;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::analysis::KlSpec;
use crate::error::{Error, Result};

pub use builtins::{builtin, registry_names, Builtin, KL_NONCONCAVE_TAU};

/// Axis-aligned box `{p : lower <= p <= upper}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxSet {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl BoxSet {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.len() != upper.len() {
            return Err(Error::DimensionMismatch {
                expected: lower.len(),
                got: upper.len(),
            });
        }
        for (index, (&lo, &hi)) in lower.iter().zip(&upper).enumerate() {
            // NaN bounds fail this comparison too.
            if !(lo <= hi) {
                return Err(Error::InvalidBox {
                    index,
                    lower: lo,
                    upper: hi,
                });
            }
        }
        Ok(Self { lower, upper })
    }

    /// The cube `[lo, hi]^dim`.
    pub fn cube(lo: f64, hi: f64, dim: usize) -> Result<Self> {
        Self::new(vec![lo; dim], vec![hi; dim])
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    /// Euclidean diameter.
    pub fn diameter(&self) -> f64 {
        self.lower
            .iter()
            .zip(&self.upper)
            .map(|(lo, hi)| (hi - lo) * (hi - lo))
            .sum::<f64>()
            .sqrt()
    }

    pub fn check_dim(&self, p: &[f64]) -> Result<()> {
        if p.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: p.len(),
            });
        }
        Ok(())
    }

    /// Euclidean projection (componentwise clamp).
    pub fn project(&self, p: &[f64]) -> Result<Vec<f64>> {
        self.check_dim(p)?;
        let mut out = p.to_vec();
        self.project_in_place(&mut out);
        Ok(out)
    }

    /// Clamp `p` into the box. The caller guarantees matching dimensions.
    pub fn project_in_place(&self, p: &mut [f64]) {
        debug_assert_eq!(p.len(), self.dim());
        for ((pi, &lo), &hi) in p.iter_mut().zip(&self.lower).zip(&self.upper) {
            *pi = pi.clamp(lo, hi);
        }
    }

    pub fn contains(&self, p: &[f64]) -> bool {
        p.len() == self.dim()
            && p.iter()
                .zip(&self.lower)
                .zip(&self.upper)
                .all(|((&pi, &lo), &hi)| lo <= pi && pi <= hi)
    }

    /// True when some coordinate sits exactly on a face of the box.
    pub fn on_boundary(&self, p: &[f64]) -> bool {
        p.iter()
            .zip(&self.lower)
            .zip(&self.upper)
            .any(|((&pi, &lo), &hi)| pi == lo || pi == hi)
    }
}

/// Scalar second derivatives of a problem with one-dimensional blocks.
///
/// `xy` is the derivative of `grad_x` with respect to `y` and `yx` the
/// derivative of `grad_y` with respect to `x`; they differ for problems that
/// are specified through a non-conservative gradient field.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SecondDerivs {
    pub xx: f64,
    pub xy: f64,
    pub yx: f64,
    pub yy: f64,
}

/// A smooth payoff `f(x, y)` with analytic first derivatives.
pub trait Payoff: Send + Sync + fmt::Debug {
    /// `f(x, y)`, or `None` when the problem is defined only through its
    /// gradient field.
    fn value(&self, x: &[f64], y: &[f64]) -> Option<f64>;

    fn grad_x(&self, x: &[f64], y: &[f64], out: &mut [f64]);

    fn grad_y(&self, x: &[f64], y: &[f64], out: &mut [f64]);

    fn has_value(&self) -> bool {
        true
    }

    fn second_derivs(&self, _x: &[f64], _y: &[f64]) -> Option<SecondDerivs> {
        None
    }
}

/// One-sided structural condition attached to a problem.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum SideCondition {
    /// Kurdyka-Lojasiewicz inequality with the given exponent and modulus.
    Kl(KlSpec),
    /// Concave in `y` (dual side) or convex in `x` (primal side).
    Curvature,
}

/// Regularity tags used by the proximal error-bound checks.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Regularity {
    /// Condition on `f(x, .)` for every fixed `x`.
    pub dual: Option<SideCondition>,
    /// Condition on `f(., y)` for every fixed `y`.
    pub primal: Option<SideCondition>,
}

/// `min_{x in X} max_{y in Y} f(x, y)` with box constraints and gradient
/// Lipschitz moduli `L_x`, `L_y`.
#[derive(Clone)]
pub struct MinimaxProblem {
    name: String,
    x_set: BoxSet,
    y_set: BoxSet,
    payoff: Arc<dyn Payoff>,
    lip_x: f64,
    lip_y: f64,
    regularity: Regularity,
}

impl fmt::Debug for MinimaxProblem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("MinimaxProblem")
            .field("name", &self.name)
            .field("x_set", &self.x_set)
            .field("y_set", &self.y_set)
            .field("lip_x", &self.lip_x)
            .field("lip_y", &self.lip_y)
            .field("regularity", &self.regularity)
            .finish()
    }
}

impl MinimaxProblem {
    pub fn new(
        name: impl Into<String>,
        x_set: BoxSet,
        y_set: BoxSet,
        payoff: Arc<dyn Payoff>,
        lip_x: f64,
        lip_y: f64,
    ) -> Result<Self> {
        if x_set.dim() == 0 || y_set.dim() == 0 {
            return Err(Error::InvalidParam(
                "problem blocks must be nonempty".into(),
            ));
        }
        if !(lip_x >= 0.0 && lip_y >= 0.0) {
            return Err(Error::InvalidParam(format!(
                "Lipschitz moduli must be nonnegative, got L_x = {lip_x}, L_y = {lip_y}"
            )));
        }
        Ok(Self {
            name: name.into(),
            x_set,
            y_set,
            payoff,
            lip_x,
            lip_y,
            regularity: Regularity::default(),
        })
    }

    pub fn with_regularity(mut self, regularity: Regularity) -> Self {
        self.regularity = regularity;
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim_x(&self) -> usize {
        self.x_set.dim()
    }

    pub fn dim_y(&self) -> usize {
        self.y_set.dim()
    }

    pub fn x_set(&self) -> &BoxSet {
        &self.x_set
    }

    pub fn y_set(&self) -> &BoxSet {
        &self.y_set
    }

    pub fn lip_x(&self) -> f64 {
        self.lip_x
    }

    pub fn lip_y(&self) -> f64 {
        self.lip_y
    }

    /// `lambda = L_y / L_x`.
    pub fn lambda(&self) -> f64 {
        self.lip_y / self.lip_x
    }

    /// `max(L_x, L_y)`, the modulus used by the baseline step-size defaults.
    pub fn lip_max(&self) -> f64 {
        self.lip_x.max(self.lip_y)
    }

    pub fn regularity(&self) -> &Regularity {
        &self.regularity
    }

    pub fn payoff(&self) -> &dyn Payoff {
        self.payoff.as_ref()
    }

    pub fn has_value(&self) -> bool {
        self.payoff.has_value()
    }

    pub(crate) fn check_point(&self, x: &[f64], y: &[f64]) -> Result<()> {
        self.x_set.check_dim(x)?;
        self.y_set.check_dim(y)
    }

    /// Error unless `f` can be evaluated.
    pub fn require_value(&self) -> Result<()> {
        if self.has_value() {
            Ok(())
        } else {
            Err(Error::GradientOnly(self.name.clone()))
        }
    }

    pub fn value(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        self.check_point(x, y)?;
        self.payoff
            .value(x, y)
            .ok_or_else(|| Error::GradientOnly(self.name.clone()))
    }

    pub fn grad_x(&self, x: &[f64], y: &[f64]) -> Result<Vec<f64>> {
        self.check_point(x, y)?;
        let mut g = vec![0.0; x.len()];
        self.payoff.grad_x(x, y, &mut g);
        Ok(g)
    }

    pub fn grad_y(&self, x: &[f64], y: &[f64]) -> Result<Vec<f64>> {
        self.check_point(x, y)?;
        let mut g = vec![0.0; y.len()];
        self.payoff.grad_y(x, y, &mut g);
        Ok(g)
    }

    pub fn second_derivs(&self, x: &[f64], y: &[f64]) -> Result<Option<SecondDerivs>> {
        self.check_point(x, y)?;
        Ok(self.payoff.second_derivs(x, y))
    }

    /// The monotone-operator view `G(u) = [grad_x f; -grad_y f]`.
    pub fn field(&self, x: &[f64], y: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        let gx = self.grad_x(x, y)?;
        let mut gy = self.grad_y(x, y)?;
        gy.iter_mut().for_each(|g| *g = -*g);
        Ok((gx, gy))
    }

    /// `F(x, y, z, v) = f(x, y) + r1/2 |x - z|^2 - r2/2 |y - v|^2`.
    pub fn eval_regularized(&self, r1: f64, r2: f64, s: &SmoothedState) -> Result<f64> {
        self.check_state(s)?;
        let f = self.value(&s.x, &s.y)?;
        Ok(f + 0.5 * r1 * sq_dist(&s.x, &s.z) - 0.5 * r2 * sq_dist(&s.y, &s.v))
    }

    /// `grad_x F = grad_x f + r1 (x - z)`.
    pub fn grad_regularized_x(&self, r1: f64, s: &SmoothedState) -> Result<Vec<f64>> {
        self.check_state(s)?;
        let mut g = self.grad_x(&s.x, &s.y)?;
        for ((gi, xi), zi) in g.iter_mut().zip(&s.x).zip(&s.z) {
            *gi += r1 * (xi - zi);
        }
        Ok(g)
    }

    /// `grad_y F = grad_y f - r2 (y - v)`.
    pub fn grad_regularized_y(&self, r2: f64, s: &SmoothedState) -> Result<Vec<f64>> {
        self.check_state(s)?;
        let mut g = self.grad_y(&s.x, &s.y)?;
        for ((gi, yi), vi) in g.iter_mut().zip(&s.y).zip(&s.v) {
            *gi -= r2 * (yi - vi);
        }
        Ok(g)
    }

    pub fn check_state(&self, s: &SmoothedState) -> Result<()> {
        self.x_set.check_dim(&s.x)?;
        self.x_set.check_dim(&s.z)?;
        self.y_set.check_dim(&s.y)?;
        self.y_set.check_dim(&s.v)
    }

    /// Error unless `(x, y)` lies in `X x Y`.
    pub fn check_feasible(&self, x: &[f64], y: &[f64]) -> Result<()> {
        self.check_point(x, y)?;
        if !self.x_set.contains(x) {
            return Err(Error::Infeasible(format!("x = {x:?} is not in X")));
        }
        if !self.y_set.contains(y) {
            return Err(Error::Infeasible(format!("y = {y:?} is not in Y")));
        }
        Ok(())
    }

    /// Largest relative discrepancy between the analytic gradients and
    /// central differences of `f` over `samples` uniformly drawn interior
    /// points. The discrepancy of a component is
    /// `|analytic - fd| / max(1, |analytic|)`.
    pub fn fd_gradient_check(&self, samples: usize, step: f64, seed: u64) -> Result<f64> {
        if !(step > 0.0) {
            return Err(Error::InvalidParam(format!(
                "finite-difference step must be positive, got {step}"
            )));
        }
        self.require_value()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let draw = |set: &BoxSet, rng: &mut ChaCha8Rng| -> Vec<f64> {
            set.lower()
                .iter()
                .zip(set.upper())
                .map(|(&lo, &hi)| {
                    // keep the stencil inside the box
                    let (a, b) = (lo + step, hi - step);
                    if a < b {
                        rng.random_range(a..b)
                    } else {
                        0.5 * (lo + hi)
                    }
                })
                .collect()
        };
        let mut worst = 0.0_f64;
        for _ in 0..samples {
            let x = draw(&self.x_set, &mut rng);
            let y = draw(&self.y_set, &mut rng);
            let gx = self.grad_x(&x, &y)?;
            let gy = self.grad_y(&x, &y)?;
            for i in 0..x.len() {
                let (mut xp, mut xm) = (x.clone(), x.clone());
                xp[i] += step;
                xm[i] -= step;
                let fd = (self.value(&xp, &y)? - self.value(&xm, &y)?) / (2.0 * step);
                worst = worst.max((gx[i] - fd).abs() / gx[i].abs().max(1.0));
            }
            for j in 0..y.len() {
                let (mut yp, mut ym) = (y.clone(), y.clone());
                yp[j] += step;
                ym[j] -= step;
                let fd = (self.value(&x, &yp)? - self.value(&x, &ym)?) / (2.0 * step);
                worst = worst.max((gy[j] - fd).abs() / gy[j].abs().max(1.0));
            }
        }
        Ok(worst)
    }
}

/// Iterate of DS-GDA: decision variables `(x, y)` and their exponentially
/// averaged anchors `(z, v)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SmoothedState {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub z: Vec<f64>,
    pub v: Vec<f64>,
}

impl SmoothedState {
    pub fn new(x: Vec<f64>, y: Vec<f64>, z: Vec<f64>, v: Vec<f64>) -> Self {
        Self { x, y, z, v }
    }

    /// Anchors initialized at the decision variables (`z = x`, `v = y`).
    pub fn from_xy(x: Vec<f64>, y: Vec<f64>) -> Self {
        Self {
            z: x.clone(),
            v: y.clone(),
            x,
            y,
        }
    }

    /// Shorthand for one-dimensional blocks.
    pub fn scalar(x: f64, y: f64, z: f64, v: f64) -> Self {
        Self::new(vec![x], vec![y], vec![z], vec![v])
    }

    pub fn is_finite(&self) -> bool {
        [&self.x, &self.y, &self.z, &self.v]
            .iter()
            .all(|c| c.iter().all(|p| p.is_finite()))
    }

    /// `max(|x - z|_inf, |y - v|_inf)`.
    pub fn proximal_gap(&self) -> f64 {
        inf_dist(&self.x, &self.z).max(inf_dist(&self.y, &self.v))
    }
}

pub(crate) fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(p, q)| (p - q) * (p - q)).sum()
}

pub(crate) fn dist(a: &[f64], b: &[f64]) -> f64 {
    sq_dist(a, b).sqrt()
}

pub(crate) fn inf_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0, |m, (p, q)| m.max((p - q).abs()))
}
