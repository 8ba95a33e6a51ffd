use rayon::prelude::*;
use serde::Serialize;

use super::constants::{constants_unchecked, smoothing_precondition};
use crate::error::{Error, Result};
use crate::solvers::AlgoParams;

/// One inequality of an admissibility check.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Bound {
    pub name: &'static str,
    /// Left-hand side (the parameter under test).
    pub value: f64,
    /// Right-hand side.
    pub limit: f64,
    pub holds: bool,
}

impl Bound {
    fn le(name: &'static str, value: f64, limit: f64) -> Self {
        Self {
            name,
            value,
            limit,
            holds: value <= limit,
        }
    }

    fn lt(name: &'static str, value: f64, limit: f64) -> Self {
        Self {
            name,
            value,
            limit,
            holds: value < limit,
        }
    }

    fn ge(name: &'static str, value: f64, limit: f64) -> Self {
        Self {
            name,
            value,
            limit,
            holds: value >= limit,
        }
    }

    fn gt(name: &'static str, value: f64, limit: f64) -> Self {
        Self {
            name,
            value,
            limit,
            holds: value > limit,
        }
    }
}

/// Per-bound outcome of a step-size admissibility check.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DescentReport {
    pub bounds: Vec<Bound>,
}

impl DescentReport {
    pub fn passed(&self) -> bool {
        self.bounds.iter().all(|b| b.holds)
    }

    pub fn failures(&self) -> impl Iterator<Item = &Bound> {
        self.bounds.iter().filter(|b| !b.holds)
    }

    /// `Ok` when every bound holds, otherwise an error naming the failures.
    pub fn into_result(self) -> Result<()> {
        if self.passed() {
            return Ok(());
        }
        let failed: Vec<String> = self
            .failures()
            .map(|b| format!("{} (lhs {:e}, rhs {:e})", b.name, b.value, b.limit))
            .collect();
        Err(Error::Precondition(format!(
            "descent-estimate bounds violated: {}",
            failed.join("; ")
        )))
    }
}

fn common_bounds(p: &AlgoParams) -> Vec<Bound> {
    vec![
        Bound::gt("c > 0", p.c, 0.0),
        Bound::gt("alpha > 0", p.alpha, 0.0),
        Bound::gt("beta > 0", p.beta, 0.0),
        Bound::lt("beta < 1", p.beta, 1.0),
        Bound::gt("mu > 0", p.mu, 0.0),
        Bound::lt("mu < 1", p.mu, 1.0),
    ]
}

/// Hypotheses of the basic descent estimate for `Phi` with
/// `L_x = l` and `L_y = lambda l`.
///
/// `sigma = (2 c r1 + 1)/(c (r1 - L))` in the `alpha` bound is evaluated with
/// the candidate `c`.
pub fn check_descent_params(l: f64, lambda: f64, p: &AlgoParams) -> DescentReport {
    let ly = lambda * l;
    let (c, alpha, beta, mu, r1, r2) = (p.c, p.alpha, p.beta, p.mu, p.r1, p.r2);
    let mut bounds = common_bounds(p);
    bounds.push(Bound::ge("r1 >= 2L", r1, 2.0 * l));
    bounds.push(Bound::ge("r2 >= 2 lambda L", r2, 2.0 * ly));
    bounds.push(Bound::gt(
        "r2 > (lambda L/(r1 - L) + 2) lambda L",
        r2,
        (ly / (r1 - l) + 2.0) * ly,
    ));
    bounds.push(Bound::le("c <= 4/(3(L + r1))", c, 4.0 / (3.0 * (l + r1))));
    bounds.push(Bound::le("c <= 1/(6 lambda L)", c, 1.0 / (6.0 * ly)));
    let sigma = (2.0 * c * r1 + 1.0) / (c * (r1 - l));
    let l_d = (ly / (r1 - l) + 2.0) * ly + r2;
    bounds.push(Bound::le(
        "alpha <= 2/(3 lambda L sigma^2)",
        alpha,
        2.0 / (3.0 * ly * sigma * sigma),
    ));
    bounds.push(Bound::le("alpha <= 1/(6 L_d)", alpha, 1.0 / (6.0 * l_d)));
    bounds.push(Bound::le(
        "alpha <= 1/(5 lambda sqrt(lambda + 5) L)",
        alpha,
        1.0 / (5.0 * lambda * (lambda + 5.0).sqrt() * l),
    ));
    bounds.push(Bound::le(
        "beta <= 24 r1/(360 r1 + 5 r1^2 lambda + (2 lambda L + 5 r1)^2)",
        beta,
        24.0 * r1 / (360.0 * r1 + 5.0 * r1 * r1 * lambda + (2.0 * ly + 5.0 * r1).powi(2)),
    ));
    bounds.push(Bound::le(
        "beta <= alpha lambda^2 L^2/(384 r1 (lambda + 5)(lambda + 1)^2)",
        beta,
        alpha * ly * ly / (384.0 * r1 * (lambda + 5.0) * (lambda + 1.0).powi(2)),
    ));
    bounds.push(Bound::le(
        "mu <= 2(lambda + 5)/(2(lambda + 5) + lambda^2 L^2)",
        mu,
        2.0 * (lambda + 5.0) / (2.0 * (lambda + 5.0) + ly * ly),
    ));
    bounds.push(Bound::le(
        "mu <= alpha lambda^2 L^2/(64 r2 (lambda + 5))",
        mu,
        alpha * ly * ly / (64.0 * r2 * (lambda + 5.0)),
    ));
    DescentReport { bounds }
}

/// Mirror of [`check_descent_params`] for the dual-side Lyapunov function
/// `Psi`, obtained by exchanging `(x, z, r1, c, beta, L_x)` with
/// `(y, v, r2, alpha, mu, L_y)`.
pub fn check_dual_descent_params(l: f64, lambda: f64, p: &AlgoParams) -> DescentReport {
    let ly = lambda * l;
    let (c, alpha, beta, mu, r1, r2) = (p.c, p.alpha, p.beta, p.mu, p.r1, p.r2);
    let mut bounds = common_bounds(p);
    bounds.push(Bound::ge("r1 >= 2L", r1, 2.0 * l));
    bounds.push(Bound::ge("r2 >= 2 lambda L", r2, 2.0 * ly));
    bounds.push(Bound::gt(
        "r1 > (L/(r2 - lambda L) + 2) L",
        r1,
        (l / (r2 - ly) + 2.0) * l,
    ));
    bounds.push(Bound::le(
        "alpha <= 4/(3(lambda L + r2))",
        alpha,
        4.0 / (3.0 * (ly + r2)),
    ));
    bounds.push(Bound::le("alpha <= 1/(6L)", alpha, 1.0 / (6.0 * l)));
    let sigma_p = (2.0 * alpha * r2 + 1.0) / (alpha * (r2 - ly));
    let l_h = (l / (r2 - ly) + 2.0) * l + r1;
    bounds.push(Bound::le(
        "c <= 2/(3 L sigma'^2)",
        c,
        2.0 / (3.0 * l * sigma_p * sigma_p),
    ));
    bounds.push(Bound::le("c <= 1/(6 L_h)", c, 1.0 / (6.0 * l_h)));
    bounds.push(Bound::le(
        "c <= 1/(5 sqrt(lambda + 5) L)",
        c,
        1.0 / (5.0 * (lambda + 5.0).sqrt() * l),
    ));
    bounds.push(Bound::le(
        "mu <= 24 r2/(360 r2 + 5 r2^2 lambda + (2L + 5 r2)^2)",
        mu,
        24.0 * r2 / (360.0 * r2 + 5.0 * r2 * r2 * lambda + (2.0 * l + 5.0 * r2).powi(2)),
    ));
    bounds.push(Bound::le(
        "mu <= c L^2/(384 r2 (lambda + 5)(lambda + 1)^2)",
        mu,
        c * l * l / (384.0 * r2 * (lambda + 5.0) * (lambda + 1.0).powi(2)),
    ));
    bounds.push(Bound::le(
        "beta <= 2(lambda + 5)/(2(lambda + 5) + L^2)",
        beta,
        2.0 * (lambda + 5.0) / (2.0 * (lambda + 5.0) + l * l),
    ));
    bounds.push(Bound::le(
        "beta <= c L^2/(64 r1 (lambda + 5))",
        beta,
        c * l * l / (64.0 * r1 * (lambda + 5.0)),
    ));
    DescentReport { bounds }
}

/// The universal parameter formulas (`lambda = 1`, `r1 = r2 = r`):
///
/// ```text
/// c = alpha = min{4/(3(L + r)), 1/(6L), 1/(6 L_d), 1/(5 sqrt(6) L)}
/// beta = mu = min{24r/(360r + 5r^2 + (2L + 5r)^2), c L^2/(9216 r),
///                 12/(12 + L^2), c L^2/(384 r), cap}
/// ```
///
/// with `L_d = (L/(r - L) + 2) L + r`. Errors when `r < 2L` or when the
/// lower bound `8L/(3(r - L)^2) < c < 1` fails, in which case `r` has to
/// grow.
pub fn universal_params_at(l: f64, r: f64, cap: Option<f64>) -> Result<AlgoParams> {
    if !(l > 0.0 && l.is_finite()) {
        return Err(Error::InvalidParam(format!("L must be positive, got {l}")));
    }
    if !(r >= 2.0 * l) {
        return Err(Error::Precondition(format!(
            "r >= 2L fails: r = {r}, L = {l}"
        )));
    }
    if let Some(cap) = cap {
        if !(cap > 0.0) {
            return Err(Error::InvalidParam(format!(
                "beta cap must be positive, got {cap}"
            )));
        }
    }
    let l_d = (l / (r - l) + 2.0) * l + r;
    let c = (4.0 / (3.0 * (l + r)))
        .min(1.0 / (6.0 * l))
        .min(1.0 / (6.0 * l_d))
        .min(1.0 / (5.0 * 6.0_f64.sqrt() * l));
    let mut beta = (24.0 * r / (360.0 * r + 5.0 * r * r + (2.0 * l + 5.0 * r).powi(2)))
        .min(c * l * l / (9216.0 * r))
        .min(12.0 / (12.0 + l * l))
        .min(c * l * l / (384.0 * r));
    if let Some(cap) = cap {
        beta = beta.min(cap);
    }
    let lower = 8.0 * l / (3.0 * (r - l).powi(2));
    if !(lower < c && c < 1.0) {
        return Err(Error::Precondition(format!(
            "8L/(3(r-L)^2) < c < 1 fails: lower bound {lower:e}, c = {c:e}; increase r"
        )));
    }
    AlgoParams::new(c, c, beta, beta, r, r)
}

const MAX_T2: u32 = 100_000;

/// Smallest integer `t >= 2` such that `r = t L` yields universal parameters
/// that satisfy both the lower bound on `c` and [`check_descent_params`].
pub fn universal_t2(l: f64) -> Result<u32> {
    if !(l > 0.0 && l.is_finite()) {
        return Err(Error::InvalidParam(format!("L must be positive, got {l}")));
    }
    (2..=MAX_T2)
        .find(|&t| {
            universal_params_at(l, t as f64 * l, None)
                .map(|p| check_descent_params(l, 1.0, &p).passed())
                .unwrap_or(false)
        })
        .ok_or_else(|| Error::Precondition(format!("no admissible radius r <= {MAX_T2} L")))
}

/// Universal parameters for `L_x = L_y = L` at the smallest admissible
/// radius `r = t L` (see [`universal_t2`]).
pub fn universal_params(l: f64) -> Result<AlgoParams> {
    let t = universal_t2(l)?;
    universal_params_at(l, t as f64 * l, None)
}

/// The four coefficients of the descent inequality at one `(t1, t2)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FeasibilityPoint {
    pub t1: f64,
    pub t2: f64,
    pub coefficients: [f64; 4],
    pub feasible: bool,
}

/// Evaluate the coefficients of `|x^{t+1}-x^t|^2`, `|y^t-y_+^t|^2`,
/// `|z^t-z^{t+1}|^2` and `|v^t-v_+^t|^2` in the descent inequality with
/// `lambda = 1`, `r1 = r2 = t2 L`, `c = alpha = 1/(t1 r)` and `kappa = 2 beta`.
pub fn feasibility_point(l: f64, beta: f64, mu: f64, t1: f64, t2: f64) -> FeasibilityPoint {
    let (lx, ly) = (l, l);
    let r = t2 * l;
    let (r1, r2) = (r, r);
    let c = 1.0 / (t1 * r);
    let alpha = c;
    let k = constants_unchecked(lx, ly, r1, r2, c, alpha);
    let kappa = 2.0 * beta;
    let s1 = 1.0 / c - (lx + r1) / 2.0 - ly;
    let s2 = 1.0 / alpha + (r2 - ly) / 2.0 - k.l_d - ly * k.sigma6 * k.sigma6;
    let s3 = r1 * ((2.0 - beta) / (2.0 * beta) - 2.0 * k.sigma2 - 1.0 / kappa);
    let a = 12.0 * r1 * kappa * k.sigma1 * k.sigma1;
    let m = mu * (2.0 - mu) * r2;
    let coefficients = [
        s1 - (a + s2 + 2.0 * m) * ly * ly * alpha * alpha * k.sigma6 * k.sigma6,
        s2 / 2.0 - (a + 2.0 * m) * (1.0 + k.sigma8).powi(2),
        s3 - (m + a / 2.0) * k.sigma3 * k.sigma3,
        (2.0 - mu) * r2 / (4.0 * mu) - a / 2.0 * k.sigma5 * k.sigma5,
    ];
    let admissible = t1 > 0.0
        && t2 >= 2.0
        && beta > 0.0
        && mu > 0.0
        && smoothing_precondition(lx, ly, r1, r2).is_ok();
    let feasible = admissible && coefficients.iter().all(|&v| v > 0.0);
    FeasibilityPoint {
        t1,
        t2,
        coefficients,
        feasible,
    }
}

/// Boolean feasibility matrix over a `(t1, t2)` lattice;
/// `feasible[i][j]` refers to `(t1[i], t2[j])`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScanMatrix {
    pub t1: Vec<f64>,
    pub t2: Vec<f64>,
    pub feasible: Vec<Vec<bool>>,
}

impl ScanMatrix {
    pub fn count_feasible(&self) -> usize {
        self.feasible.iter().flatten().filter(|&&f| f).count()
    }

    /// Feasibility of the lattice node nearest to `(t1, t2)`.
    pub fn nearest(&self, t1: f64, t2: f64) -> Option<bool> {
        let near = |axis: &[f64], t: f64| {
            axis.iter()
                .enumerate()
                .min_by(|a, b| (a.1 - t).abs().total_cmp(&(b.1 - t).abs()))
                .map(|(i, _)| i)
        };
        Some(self.feasible[near(&self.t1, t1)?][near(&self.t2, t2)?])
    }
}

fn lattice(range: (f64, f64), steps: usize) -> Vec<f64> {
    let (lo, hi) = range;
    match steps {
        0 => Vec::new(),
        1 => vec![lo],
        n => (0..n)
            .map(|k| lo + (hi - lo) * k as f64 / (n - 1) as f64)
            .collect(),
    }
}

/// Scan `grid_steps x grid_steps` evenly spaced `(t1, t2)` pairs (endpoints
/// included) with [`feasibility_point`].
pub fn feasibility_scan(
    l: f64,
    beta: f64,
    mu: f64,
    t1_range: (f64, f64),
    t2_range: (f64, f64),
    grid_steps: usize,
) -> ScanMatrix {
    let t1 = lattice(t1_range, grid_steps);
    let t2 = lattice(t2_range, grid_steps);
    let feasible = t1
        .par_iter()
        .map(|&a| {
            t2.iter()
                .map(|&b| feasibility_point(l, beta, mu, a, b).feasible)
                .collect()
        })
        .collect();
    ScanMatrix { t1, t2, feasible }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn universal_formula_at_twice_l() {
        // the formula itself; the lower bound on c rules this radius out
        let l: f64 = 1.0;
        let r = 2.0;
        let l_d: f64 = (l / (r - l) + 2.0) * l + r;
        assert_eq!(l_d, 5.0);
        let err = universal_params_at(1.0, 2.0, None).unwrap_err();
        assert!(err.to_string().contains("increase r"), "{err}");
    }

    #[test]
    fn universal_c_at_twice_l_is_one_thirtieth() {
        let c = (4.0 / 9.0_f64)
            .min(1.0 / 6.0)
            .min(1.0 / 30.0)
            .min(1.0 / (5.0 * 6.0_f64.sqrt()));
        assert_eq!(c, 1.0 / 30.0);
        // same value through the search-free formula with a wide radius cap off
        let p = universal_params_at(1.0, 21.0, None).unwrap();
        assert!(p.c < 1.0 / 30.0);
    }

    #[test]
    fn universal_params_pass_descent_check() {
        for l in [0.1, 1.0, 10.0] {
            let p = universal_params(l).unwrap();
            let report = check_descent_params(l, 1.0, &p);
            assert!(
                report.passed(),
                "L = {l}: {:?}",
                report.failures().collect::<Vec<_>>()
            );
            assert_eq!(p.c, p.alpha);
            assert_eq!(p.beta, p.mu);
        }
    }

    #[test]
    fn universal_scaling() {
        let a = universal_params(1.0).unwrap();
        let b = universal_params(2.0).unwrap();
        assert_eq!(universal_t2(1.0).unwrap(), universal_t2(2.0).unwrap());
        assert!((b.c - a.c / 2.0).abs() < 1e-15);
    }

    #[test]
    fn cap_is_applied() {
        let p = universal_params_at(1.0, 21.0, Some(1e-9)).unwrap();
        assert_eq!(p.beta, 1e-9);
        assert_eq!(p.mu, 1e-9);
    }

    #[test]
    fn large_c_fails() {
        let p = AlgoParams::new(1.0, 1e-3, 1e-6, 1e-6, 2.0, 8.0).unwrap();
        let r = check_descent_params(1.0, 1.0, &p);
        assert!(!r.passed());
        let fails: Vec<_> = r.failures().map(|b| b.name).collect();
        assert!(fails.contains(&"c <= 4/(3(L + r1))"), "{fails:?}");
        let b = r
            .bounds
            .iter()
            .find(|b| b.name == "c <= 4/(3(L + r1))")
            .unwrap();
        assert!((b.limit - 4.0 / 9.0).abs() < 1e-15);
    }

    #[test]
    fn r1_equal_l_fails() {
        let p = AlgoParams::new(1e-3, 1e-3, 1e-6, 1e-6, 1.0, 8.0).unwrap();
        let r = check_descent_params(1.0, 1.0, &p);
        assert!(r.failures().any(|b| b.name == "r1 >= 2L"));
        assert!(r
            .into_result()
            .unwrap_err()
            .to_string()
            .contains("r1 >= 2L"));
    }

    #[test]
    fn scan_region() {
        let m = feasibility_scan(1.0, 2e-4, 2e-4, (0.0, 100.0), (0.0, 100.0), 101);
        assert!(m.count_feasible() > 0);
        // t2 < 2 columns are empty
        for row in &m.feasible {
            assert!(!row[0] && !row[1]);
        }
        let p = universal_params(1.0).unwrap();
        let t2 = p.r1;
        let t1 = 1.0 / (p.c * p.r1);
        assert!(feasibility_point(1.0, 2e-4, 2e-4, t1, t2).feasible);
    }

    #[test]
    fn scan_is_order_independent() {
        let m = feasibility_scan(1.0, 2e-4, 2e-4, (0.0, 100.0), (0.0, 100.0), 41);
        for i in (0..m.t1.len()).rev() {
            for j in (0..m.t2.len()).rev() {
                let p = feasibility_point(1.0, 2e-4, 2e-4, m.t1[i], m.t2[j]);
                assert_eq!(p.feasible, m.feasible[i][j]);
            }
        }
    }

    #[test]
    fn dual_check_mirrors_primal_on_symmetric_problem() {
        let p = universal_params(1.0).unwrap();
        // with lambda = 1, c = alpha and beta = mu the mirror is the same system
        let a = check_descent_params(1.0, 1.0, &p);
        let b = check_dual_descent_params(1.0, 1.0, &p);
        assert_eq!(a.passed(), b.passed());
    }
}
