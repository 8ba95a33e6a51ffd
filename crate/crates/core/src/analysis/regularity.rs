use rayon::prelude::*;
use serde::Serialize;

use super::Side;
use crate::error::{Error, Result};
use crate::measures::gs_residual;
use crate::oracle::{grid_argmax, grid_argmin, GridSpec};
use crate::problems::MinimaxProblem;

/// Fields with `|G(u)|` below this are excluded from `rho`.
const FIELD_FLOOR: f64 = 1e-12;
/// Gaps at or below this count as zero in the KL scan.
const GAP_FLOOR: f64 = 1e-12;

fn require_scalar(prob: &MinimaxProblem, what: &str) -> Result<()> {
    if prob.dim_x() == 1 && prob.dim_y() == 1 {
        Ok(())
    } else {
        Err(Error::Unsupported(format!(
            "{what} is implemented for one-dimensional blocks only"
        )))
    }
}

/// `rho(u) = <G(u), u - u*> / |G(u)|^2` with `G = [grad_x f; -grad_y f]`,
/// or `None` where `|G(u)| < 1e-12`.
pub fn rho_at(
    prob: &MinimaxProblem,
    u_star: (&[f64], &[f64]),
    x: &[f64],
    y: &[f64],
) -> Result<Option<f64>> {
    prob.check_point(u_star.0, u_star.1)?;
    let (gx, gy) = prob.field(x, y)?;
    let sq: f64 = gx.iter().chain(&gy).map(|g| g * g).sum();
    if sq.sqrt() < FIELD_FLOOR {
        return Ok(None);
    }
    let inner: f64 = gx
        .iter()
        .zip(x.iter().zip(u_star.0))
        .map(|(g, (a, b))| g * (a - b))
        .chain(
            gy.iter()
                .zip(y.iter().zip(u_star.1))
                .map(|(g, (a, b))| g * (a - b)),
        )
        .sum();
    Ok(Some(inner / sq))
}

/// Minimum of `rho` over a box lattice.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RhoScan {
    pub min_rho: f64,
    pub argmin: (f64, f64),
    /// Weak-MVI threshold `-1/(2L)` with `L = max(L_x, L_y)`.
    pub threshold: f64,
}

impl RhoScan {
    /// True when the scan found a point violating the weak MVI condition.
    pub fn violates(&self) -> bool {
        self.min_rho < self.threshold
    }
}

/// `rho` sampled on a `resolution x resolution` lattice of `X x Y`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RhoField {
    pub xs: Vec<f64>,
    pub ys: Vec<f64>,
    /// Row-major over `xs`; `None` where the field vanishes.
    pub rho: Vec<Option<f64>>,
}

impl RhoField {
    pub fn sample(prob: &MinimaxProblem, u_star: (f64, f64), resolution: usize) -> Result<Self> {
        require_scalar(prob, "rho field")?;
        let xs = GridSpec::lattice(prob.x_set().lower()[0], prob.x_set().upper()[0], resolution);
        let ys = GridSpec::lattice(prob.y_set().lower()[0], prob.y_set().upper()[0], resolution);
        let rho = xs
            .par_iter()
            .map(|&x| {
                ys.iter()
                    .map(|&y| rho_at(prob, (&[u_star.0], &[u_star.1]), &[x], &[y]))
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?
            .into_iter()
            .flatten()
            .collect();
        Ok(Self { xs, ys, rho })
    }

    pub fn get(&self, i: usize, j: usize) -> Option<f64> {
        self.rho[i * self.ys.len() + j]
    }
}

/// Minimize `rho` over `X x Y`: a `grid.resolution^2` lattice followed by
/// `grid.levels` zooms, each a 21 x 21 lattice at a tenth of the previous
/// spacing around the incumbent. Ties go to the smallest `(x, y)`.
pub fn weak_mvi_rho(prob: &MinimaxProblem, u_star: (f64, f64), grid: &GridSpec) -> Result<RhoScan> {
    require_scalar(prob, "weak MVI scan")?;
    grid.validate()?;
    let (xl, xh) = (prob.x_set().lower()[0], prob.x_set().upper()[0]);
    let (yl, yh) = (prob.y_set().lower()[0], prob.y_set().upper()[0]);
    let eval = |x: f64, y: f64| -> Result<Option<f64>> {
        rho_at(prob, (&[u_star.0], &[u_star.1]), &[x], &[y])
    };
    let better = |cand: (f64, f64, f64), best: Option<(f64, f64, f64)>| match best {
        None => true,
        Some(b) => cand.2 < b.2 || (cand.2 == b.2 && (cand.0, cand.1) < (b.0, b.1)),
    };
    let xs = GridSpec::lattice(xl, xh, grid.resolution);
    let ys = GridSpec::lattice(yl, yh, grid.resolution);
    // rows in parallel, reduced in lattice order
    let rows: Vec<Option<(f64, f64, f64)>> = xs
        .par_iter()
        .map(|&x| -> Result<Option<(f64, f64, f64)>> {
            let mut best = None;
            for &y in &ys {
                if let Some(r) = eval(x, y)? {
                    if better((x, y, r), best) {
                        best = Some((x, y, r));
                    }
                }
            }
            Ok(best)
        })
        .collect::<Result<_>>()?;
    let mut best = None;
    for cand in rows.into_iter().flatten() {
        if better(cand, best) {
            best = Some(cand);
        }
    }
    let Some(mut inc) = best else {
        return Err(Error::Unsupported(
            "the field vanishes on the whole grid".into(),
        ));
    };
    let (mut hx, mut hy) = (
        (xh - xl) / (grid.resolution - 1) as f64,
        (yh - yl) / (grid.resolution - 1) as f64,
    );
    for _ in 0..grid.levels {
        let centre = inc;
        for i in -10..=10 {
            let x = (centre.0 + i as f64 * hx / 10.0).clamp(xl, xh);
            for j in -10..=10 {
                let y = (centre.1 + j as f64 * hy / 10.0).clamp(yl, yh);
                if let Some(r) = eval(x, y)? {
                    if better((x, y, r), Some(inc)) {
                        inc = (x, y, r);
                    }
                }
            }
        }
        hx /= 10.0;
        hy /= 10.0;
    }
    Ok(RhoScan {
        min_rho: inc.2,
        argmin: (inc.0, inc.1),
        threshold: -1.0 / (2.0 * prob.lip_max()),
    })
}

/// Interaction-dominance quantities from scalar second derivatives:
///
/// ```text
/// value_x = f_xx + f_xy f_yx / (eta - f_yy)
/// value_y = -f_yy + f_yx f_xy / (eta + f_xx)
/// ```
pub fn interaction_dominance(
    prob: &MinimaxProblem,
    x: f64,
    y: f64,
    eta: f64,
) -> Result<(f64, f64)> {
    require_scalar(prob, "interaction dominance")?;
    let d = prob.second_derivs(&[x], &[y])?.ok_or_else(|| {
        Error::Unsupported(format!("`{}` provides no second derivatives", prob.name()))
    })?;
    let den_x = eta - d.yy;
    let den_y = eta + d.xx;
    if den_x == 0.0 || den_y == 0.0 {
        return Err(Error::InvalidParam(format!(
            "singular inner term at ({x}, {y}) with eta = {eta}: eta - f_yy = {den_x}, eta + f_xx = {den_y}"
        )));
    }
    Ok((d.xx + d.xy * d.yx / den_x, -d.yy + d.yx * d.xy / den_y))
}

/// Grid certificate of a KL inequality.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KlScan {
    /// Infimum of `residual / gap^theta` over lattice points with positive
    /// gap. This is an empirical certificate on the grid, not a proof.
    pub tau: f64,
    pub witness: (f64, f64),
    pub samples: usize,
}

/// Scan `residual / gap^theta` over the `grid.resolution^2` lattice.
///
/// Dual side: `gap = max_{y'} f(x, y') - f(x, y)` with the residual
/// `dist(0, -grad_y f + N_Y(y))`. Primal side: `gap = f(x, y) -
/// min_{x'} f(x', y)` with `dist(0, grad_x f + N_X(x))`. The inner optimum
/// uses the full refined grid.
pub fn kl_ratio_scan(
    prob: &MinimaxProblem,
    side: Side,
    theta: f64,
    grid: &GridSpec,
) -> Result<KlScan> {
    require_scalar(prob, "KL scan")?;
    prob.require_value()?;
    grid.validate()?;
    if !(theta > 0.0 && theta < 1.0) {
        return Err(Error::InvalidParam(format!(
            "theta must lie in (0, 1), got {theta}"
        )));
    }
    let (xl, xh) = (prob.x_set().lower()[0], prob.x_set().upper()[0]);
    let (yl, yh) = (prob.y_set().lower()[0], prob.y_set().upper()[0]);
    let f = |x: f64, y: f64| prob.payoff().value(&[x], &[y]).expect("checked above");
    // the fixed coordinate runs over `outer`, the optimized one over `inner`
    let (outer, inner_lo, inner_hi) = match side {
        Side::Dual => (GridSpec::lattice(xl, xh, grid.resolution), yl, yh),
        Side::Primal => (GridSpec::lattice(yl, yh, grid.resolution), xl, xh),
    };
    let inner = GridSpec::lattice(inner_lo, inner_hi, grid.resolution);
    type Best = Option<(f64, f64, f64)>;
    let rows: Vec<(Best, usize)> = outer
        .par_iter()
        .map(|&a| -> Result<(Best, usize)> {
            let point = |b: f64| match side {
                Side::Dual => (a, b),
                Side::Primal => (b, a),
            };
            let opt = match side {
                Side::Dual => grid_argmax(inner_lo, inner_hi, grid, |b| f(a, b)).1,
                Side::Primal => grid_argmin(inner_lo, inner_hi, grid, |b| f(b, a)).1,
            };
            let mut best: Best = None;
            let mut used = 0;
            for &b in &inner {
                let (x, y) = point(b);
                let gap = match side {
                    Side::Dual => opt - f(x, y),
                    Side::Primal => f(x, y) - opt,
                };
                if gap <= GAP_FLOOR {
                    continue;
                }
                let (gs_x, gs_y) = gs_residual(prob, &[x], &[y])?;
                let residual = match side {
                    Side::Dual => gs_y,
                    Side::Primal => gs_x,
                };
                let ratio = residual / gap.powf(theta);
                used += 1;
                if best.is_none_or(|(_, _, r)| ratio < r) {
                    best = Some((x, y, ratio));
                }
            }
            Ok((best, used))
        })
        .collect::<Result<_>>()?;
    let mut best: Best = None;
    let mut samples = 0;
    for (row, used) in rows {
        samples += used;
        if let Some(c) = row {
            if best.is_none_or(|b| c.2 < b.2) {
                best = Some(c);
            }
        }
    }
    let (x, y, tau) =
        best.ok_or_else(|| Error::Unsupported("no lattice point has a positive gap".into()))?;
    Ok(KlScan {
        tau,
        witness: (x, y),
        samples,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::builtin;

    #[test]
    fn reference_rho_values() {
        let p = builtin("bilinear_coupled(10)").unwrap();
        let r = rho_at(&p, (&[0.0], &[0.0]), &[0.0], &[1.0])
            .unwrap()
            .unwrap();
        assert!((r + 4.0 / 89.0).abs() < 1e-12);
        let p = builtin("polar_game").unwrap();
        let r = rho_at(&p, (&[0.0], &[0.0]), &[0.8], &[0.0])
            .unwrap()
            .unwrap();
        assert!((r + 0.3722).abs() < 1e-3, "{r}");
        let p = builtin("sixth_order").unwrap();
        let r = rho_at(&p, (&[0.0], &[0.0]), &[-1.0], &[0.5])
            .unwrap()
            .unwrap();
        // symbolic differentiation of the stated payoff gives -0.0455019215
        assert!((r + 0.045501921501286).abs() < 1e-9, "{r}");
    }

    #[test]
    fn rho_excludes_zero_field() {
        let p = builtin("toy_bilinear").unwrap();
        assert_eq!(rho_at(&p, (&[0.0], &[0.0]), &[0.0], &[0.0]).unwrap(), None);
    }

    #[test]
    fn scan_minimum_is_below_witness() {
        let p = builtin("bilinear_coupled(10)").unwrap();
        let s = weak_mvi_rho(&p, (0.0, 0.0), &GridSpec::new(81, 1).unwrap()).unwrap();
        assert!(s.min_rho <= -4.0 / 89.0);
        assert!((s.threshold + 1.0 / 344.0).abs() < 1e-15);
        assert!(s.violates());
    }

    #[test]
    fn interaction_dominance_examples() {
        let eta = 20.0;
        let p = builtin("forsaken").unwrap();
        let (vx, _) = interaction_dominance(&p, 1.0, 0.0, eta).unwrap();
        assert!((vx - (0.5 - 6.0 + 5.0 + 1.0 / (eta + 0.5))).abs() < 1e-12);
        assert!(vx < 0.0);
        let p = builtin("polar_game").unwrap();
        let (vx, _) = interaction_dominance(&p, 0.8, 0.0, eta).unwrap();
        assert!((vx - (1.0 / (eta - 279.0 / 625.0) - 779.0 / 125.0)).abs() < 1e-12);
        let p = builtin("toy_bilinear").unwrap();
        let (vx, vy) = interaction_dominance(&p, 0.3, -0.4, eta).unwrap();
        assert_eq!(vx, 1.0 / eta);
        assert_eq!(vy, 1.0 / eta);
        assert!(interaction_dominance(&p, 0.0, 0.0, 0.0).is_err());
    }

    #[test]
    fn strongly_concave_toy_has_tau_two() {
        use crate::problems::{BoxSet, MinimaxProblem, Payoff};
        use std::sync::Arc;
        #[derive(Debug)]
        struct Quad;
        impl Payoff for Quad {
            fn value(&self, x: &[f64], y: &[f64]) -> Option<f64> {
                Some(x[0] * x[0] - y[0] * y[0])
            }
            fn grad_x(&self, x: &[f64], _y: &[f64], out: &mut [f64]) {
                out[0] = 2.0 * x[0];
            }
            fn grad_y(&self, _x: &[f64], y: &[f64], out: &mut [f64]) {
                out[0] = -2.0 * y[0];
            }
        }
        let b = BoxSet::cube(-1.0, 1.0, 1).unwrap();
        let p = MinimaxProblem::new("quad", b.clone(), b, Arc::new(Quad), 2.0, 2.0).unwrap();
        let s = kl_ratio_scan(&p, Side::Dual, 0.5, &GridSpec::new(101, 2).unwrap()).unwrap();
        assert!((s.tau - 2.0).abs() < 1e-9, "{}", s.tau);
    }
}
