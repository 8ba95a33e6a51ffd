//! Closed-form benchmark problems. Every builtin has scalar `x` and `y`.
//!
//! Lipschitz moduli were obtained by maximizing the absolute second
//! derivatives over the box on a grid of step `1e-3`:
//! `L_x = max(sup |f_xx|, sup |f_xy|)` and `L_y = max(sup |f_yx|, sup |f_yy|)`,
//! which bounds `|grad_x f(u) - grad_x f(u')|` by `L_x (|x - x'| + |y - y'|)`.

use std::sync::Arc;

use super::{BoxSet, MinimaxProblem, Payoff, Regularity, SecondDerivs, SideCondition};
use crate::analysis::{KlSpec, Side};
use crate::error::{Error, Result};

/// Modulus of the dual KL inequality of `kl_nonconcave` with exponent 1/2,
/// taken from `analysis::kl_ratio_scan` on a 401 x 401 grid and rounded down.
pub const KL_NONCONCAVE_TAU: f64 = 4.8;

/// Registry entries.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Builtin {
    Forsaken,
    BilinearCoupled { a: f64 },
    SixthOrder,
    PolarGame,
    KlNonconcave,
    ConvexNonconcave,
    WrongSmoothing,
    ToyBilinear,
    ConcaveToy,
}

const NAMES: [&str; 9] = [
    "forsaken",
    "bilinear_coupled(A)",
    "sixth_order",
    "polar_game",
    "kl_nonconcave",
    "convex_nonconcave",
    "wrong_smoothing",
    "toy_bilinear",
    "concave_toy",
];

/// Names accepted by [`builtin`]. `A` in `bilinear_coupled(A)` is any finite
/// coupling; plain `bilinear_coupled` means `A = 11`.
pub fn registry_names() -> &'static [&'static str] {
    &NAMES
}

impl Builtin {
    pub fn parse(name: &str) -> Result<Self> {
        let name = name.trim();
        let b = match name {
            "forsaken" => Self::Forsaken,
            "bilinear_coupled" => Self::BilinearCoupled { a: 11.0 },
            "sixth_order" => Self::SixthOrder,
            "polar_game" => Self::PolarGame,
            "kl_nonconcave" => Self::KlNonconcave,
            "convex_nonconcave" => Self::ConvexNonconcave,
            "wrong_smoothing" => Self::WrongSmoothing,
            "toy_bilinear" => Self::ToyBilinear,
            "concave_toy" => Self::ConcaveToy,
            _ => {
                let a = name
                    .strip_prefix("bilinear_coupled(")
                    .and_then(|rest| rest.strip_suffix(')'))
                    .and_then(|arg| arg.trim().parse::<f64>().ok())
                    .filter(|a| a.is_finite());
                match a {
                    Some(a) => Self::BilinearCoupled { a },
                    None => return Err(unknown(name)),
                }
            }
        };
        Ok(b)
    }

    pub fn name(&self) -> String {
        match self {
            Self::Forsaken => "forsaken".into(),
            Self::BilinearCoupled { a } => format!("bilinear_coupled({a})"),
            Self::SixthOrder => "sixth_order".into(),
            Self::PolarGame => "polar_game".into(),
            Self::KlNonconcave => "kl_nonconcave".into(),
            Self::ConvexNonconcave => "convex_nonconcave".into(),
            Self::WrongSmoothing => "wrong_smoothing".into(),
            Self::ToyBilinear => "toy_bilinear".into(),
            Self::ConcaveToy => "concave_toy".into(),
        }
    }

    /// A stationary point of `f` (first-order conditions on both blocks).
    pub fn stationary_point(&self) -> (f64, f64) {
        match self {
            Self::Forsaken => (0.07802667, 0.41193385),
            _ => (0.0, 0.0),
        }
    }

    pub fn problem(&self) -> MinimaxProblem {
        let cube = |r: f64| BoxSet::cube(-r, r, 1).expect("symmetric box is valid");
        let convex = Regularity {
            dual: None,
            primal: Some(SideCondition::Curvature),
        };
        let (payoff, half_width, lx, ly, regularity): (Arc<dyn Payoff>, f64, f64, f64, Regularity) =
            match *self {
                Self::Forsaken => (
                    Arc::new(Forsaken),
                    1.5,
                    12.3125,
                    12.3125,
                    Regularity::default(),
                ),
                Self::BilinearCoupled { a } => {
                    let l = 172.0_f64.max(a.abs());
                    (
                        Arc::new(BilinearCoupled { a }),
                        4.0,
                        l,
                        l,
                        Regularity::default(),
                    )
                }
                Self::SixthOrder => (
                    Arc::new(SixthOrder),
                    2.0,
                    10.0,
                    6.597047276986706,
                    Regularity::default(),
                ),
                Self::PolarGame => (
                    Arc::new(PolarGame),
                    1.0,
                    101.0,
                    101.0,
                    Regularity::default(),
                ),
                Self::KlNonconcave => (
                    Arc::new(KlNonconcave),
                    1.0,
                    // 2 + 6 sin^2(1), attained by f_xx at x = 0, y = +-1
                    2.0 + 6.0 * 1.0_f64.sin().powi(2),
                    28.0,
                    Regularity {
                        dual: Some(SideCondition::Kl(KlSpec {
                            theta: 0.5,
                            tau: KL_NONCONCAVE_TAU,
                            side: Side::Dual,
                        })),
                        primal: Some(SideCondition::Curvature),
                    },
                ),
                Self::ConvexNonconcave => (Arc::new(ConvexNonconcave), 1.0, 4.0, 13.0, convex),
                Self::WrongSmoothing => (Arc::new(WrongSmoothing), 1.0, 24.0, 133.0, convex),
                Self::ToyBilinear => (
                    Arc::new(ToyBilinear),
                    1.0,
                    1.0,
                    1.0,
                    Regularity {
                        dual: Some(SideCondition::Curvature),
                        primal: Some(SideCondition::Curvature),
                    },
                ),
                Self::ConcaveToy => (
                    Arc::new(ConcaveToy),
                    1.0,
                    2.0,
                    2.0,
                    Regularity {
                        dual: Some(SideCondition::Curvature),
                        primal: Some(SideCondition::Curvature),
                    },
                ),
            };
        MinimaxProblem::new(
            self.name(),
            cube(half_width),
            cube(half_width),
            payoff,
            lx,
            ly,
        )
        .expect("builtin moduli are valid")
        .with_regularity(regularity)
    }
}

fn unknown(name: &str) -> Error {
    Error::UnknownProblem {
        name: name.to_string(),
        available: NAMES.join(", "),
    }
}

/// Look up a registry problem by name.
pub fn builtin(name: &str) -> Result<MinimaxProblem> {
    Builtin::parse(name).map(|b| b.problem())
}

macro_rules! scalar_payoff {
    ($ty:ident, |$x:ident, $y:ident| value: $value:expr, gx: $gx:expr, gy: $gy:expr, hess: $hess:expr) => {
        #[allow(unused_variables)]
        impl Payoff for $ty {
            fn value(&self, x: &[f64], y: &[f64]) -> Option<f64> {
                let ($x, $y) = (x[0], y[0]);
                Some($value)
            }

            fn grad_x(&self, x: &[f64], y: &[f64], out: &mut [f64]) {
                let ($x, $y) = (x[0], y[0]);
                out[0] = $gx;
            }

            fn grad_y(&self, x: &[f64], y: &[f64], out: &mut [f64]) {
                let ($x, $y) = (x[0], y[0]);
                out[0] = $gy;
            }

            fn second_derivs(&self, x: &[f64], y: &[f64]) -> Option<SecondDerivs> {
                let ($x, $y) = (x[0], y[0]);
                let (xx, xy, yy) = $hess;
                Some(SecondDerivs { xx, xy, yx: xy, yy })
            }
        }
    };
}

#[derive(Debug)]
struct Forsaken;

fn forsaken_phi(z: f64) -> f64 {
    let z2 = z * z;
    z2 / 4.0 - z2 * z2 / 2.0 + z2 * z2 * z2 / 6.0
}

fn forsaken_dphi(z: f64) -> f64 {
    let z2 = z * z;
    z / 2.0 - 2.0 * z2 * z + z2 * z2 * z
}

fn forsaken_ddphi(z: f64) -> f64 {
    let z2 = z * z;
    0.5 - 6.0 * z2 + 5.0 * z2 * z2
}

scalar_payoff!(Forsaken, |x, y|
    value: x * (y - 0.45) + forsaken_phi(x) - forsaken_phi(y),
    gx: y - 0.45 + forsaken_dphi(x),
    gy: x - forsaken_dphi(y),
    hess: (forsaken_ddphi(x), 1.0, -forsaken_ddphi(y))
);

#[derive(Debug)]
struct BilinearCoupled {
    a: f64,
}

fn quartic(z: f64) -> f64 {
    (z + 1.0) * (z - 1.0) * (z + 3.0) * (z - 3.0)
}

impl Payoff for BilinearCoupled {
    fn value(&self, x: &[f64], y: &[f64]) -> Option<f64> {
        let (x, y) = (x[0], y[0]);
        Some(quartic(x) + self.a * x * y - quartic(y))
    }

    fn grad_x(&self, x: &[f64], y: &[f64], out: &mut [f64]) {
        let (x, y) = (x[0], y[0]);
        out[0] = 4.0 * x * x * x - 20.0 * x + self.a * y;
    }

    fn grad_y(&self, x: &[f64], y: &[f64], out: &mut [f64]) {
        let (x, y) = (x[0], y[0]);
        out[0] = self.a * x - 4.0 * y * y * y + 20.0 * y;
    }

    fn second_derivs(&self, x: &[f64], y: &[f64]) -> Option<SecondDerivs> {
        let (x, y) = (x[0], y[0]);
        Some(SecondDerivs {
            xx: 12.0 * x * x - 20.0,
            xy: self.a,
            yx: self.a,
            yy: 20.0 - 12.0 * y * y,
        })
    }
}

/// `f = P(x, y) E(x, y)` with `P = 4x^2 - w^2 - 0.1 y^4`,
/// `w = y - 3x + 0.05 x^3` and `E = exp(-0.01 (x^2 + y^2))`.
#[derive(Debug)]
struct SixthOrder;

struct SixthParts {
    p: f64,
    px: f64,
    py: f64,
    e: f64,
}

fn sixth_parts(x: f64, y: f64) -> SixthParts {
    let w = y - 3.0 * x + 0.05 * x * x * x;
    let wx = -3.0 + 0.15 * x * x;
    SixthParts {
        p: 4.0 * x * x - w * w - 0.1 * y.powi(4),
        px: 8.0 * x - 2.0 * w * wx,
        py: -2.0 * w - 0.4 * y * y * y,
        e: (-0.01 * (x * x + y * y)).exp(),
    }
}

impl Payoff for SixthOrder {
    fn value(&self, x: &[f64], y: &[f64]) -> Option<f64> {
        let s = sixth_parts(x[0], y[0]);
        Some(s.p * s.e)
    }

    fn grad_x(&self, x: &[f64], y: &[f64], out: &mut [f64]) {
        let x = x[0];
        let s = sixth_parts(x, y[0]);
        out[0] = (s.px - 0.02 * x * s.p) * s.e;
    }

    fn grad_y(&self, x: &[f64], y: &[f64], out: &mut [f64]) {
        let y = y[0];
        let s = sixth_parts(x[0], y);
        out[0] = (s.py - 0.02 * y * s.p) * s.e;
    }

    fn second_derivs(&self, x: &[f64], y: &[f64]) -> Option<SecondDerivs> {
        let (x, y) = (x[0], y[0]);
        let s = sixth_parts(x, y);
        let w = y - 3.0 * x + 0.05 * x * x * x;
        let wx = -3.0 + 0.15 * x * x;
        let pxx = 8.0 - 2.0 * wx * wx - 0.6 * w * x;
        let pxy = -2.0 * wx;
        let pyy = -2.0 - 1.2 * y * y;
        // E_x = -0.02 x E, E_xx = (-0.02 + 0.0004 x^2) E, E_xy = 0.0004 x y E
        let (ex, ey) = (-0.02 * x, -0.02 * y);
        let exx = -0.02 + 0.0004 * x * x;
        let eyy = -0.02 + 0.0004 * y * y;
        let exy = 0.0004 * x * y;
        let xy = (pxy + s.px * ey + s.py * ex + s.p * exy) * s.e;
        Some(SecondDerivs {
            xx: (pxx + 2.0 * s.px * ex + s.p * exx) * s.e,
            xy,
            yx: xy,
            yy: (pyy + 2.0 * s.py * ey + s.p * eyy) * s.e,
        })
    }
}

/// Defined through `G(u) = [Phi(x, y) - y; Phi(y, x) + x]`, so
/// `grad_x f = Phi(x, y) - y` and `grad_y f = -Phi(y, x) - x`.
#[derive(Debug)]
struct PolarGame;

fn polar_phi(a: f64, b: f64) -> f64 {
    let s = a * a + b * b;
    a * (s - 1.0) * (16.0 * s - 9.0)
}

fn polar_dphi_da(a: f64, b: f64) -> f64 {
    let s = a * a + b * b;
    (s - 1.0) * (16.0 * s - 9.0) + 2.0 * a * a * (16.0 * s - 9.0) + 32.0 * a * a * (s - 1.0)
}

fn polar_dphi_db(a: f64, b: f64) -> f64 {
    let s = a * a + b * b;
    2.0 * a * b * (16.0 * s - 9.0) + 32.0 * a * b * (s - 1.0)
}

impl Payoff for PolarGame {
    fn value(&self, _x: &[f64], _y: &[f64]) -> Option<f64> {
        None
    }

    fn has_value(&self) -> bool {
        false
    }

    fn grad_x(&self, x: &[f64], y: &[f64], out: &mut [f64]) {
        let (x, y) = (x[0], y[0]);
        out[0] = polar_phi(x, y) - y;
    }

    fn grad_y(&self, x: &[f64], y: &[f64], out: &mut [f64]) {
        let (x, y) = (x[0], y[0]);
        out[0] = -polar_phi(y, x) - x;
    }

    fn second_derivs(&self, x: &[f64], y: &[f64]) -> Option<SecondDerivs> {
        let (x, y) = (x[0], y[0]);
        Some(SecondDerivs {
            xx: polar_dphi_da(x, y),
            xy: polar_dphi_db(x, y) - 1.0,
            yx: -polar_dphi_db(y, x) - 1.0,
            yy: -polar_dphi_da(y, x),
        })
    }
}

#[derive(Debug)]
struct KlNonconcave;

scalar_payoff!(KlNonconcave, |x, y|
    value: {
        let (sx, sy) = (x.sin(), y.sin());
        x * x + 3.0 * sx * sx * sy * sy - 4.0 * y * y - 10.0 * sy * sy
    },
    gx: 2.0 * x + 3.0 * (2.0 * x).sin() * y.sin().powi(2),
    gy: 3.0 * x.sin().powi(2) * (2.0 * y).sin() - 8.0 * y - 10.0 * (2.0 * y).sin(),
    hess: (
        2.0 + 6.0 * (2.0 * x).cos() * y.sin().powi(2),
        3.0 * (2.0 * x).sin() * (2.0 * y).sin(),
        6.0 * x.sin().powi(2) * (2.0 * y).cos() - 8.0 - 20.0 * (2.0 * y).cos()
    )
);

#[derive(Debug)]
struct ConvexNonconcave;

scalar_payoff!(ConvexNonconcave, |x, y|
    value: 2.0 * x * x - y * y + 4.0 * x * y + 4.0 * y * y * y / 3.0 - y.powi(4) / 4.0,
    gx: 4.0 * x + 4.0 * y,
    gy: -2.0 * y + 4.0 * x + 4.0 * y * y - y * y * y,
    hess: (4.0, 4.0, -2.0 + 8.0 * y - 3.0 * y * y)
);

#[derive(Debug)]
struct WrongSmoothing;

scalar_payoff!(WrongSmoothing, |x, y|
    value: 2.0 * x * x - y * y + 4.0 * x * y.powi(6) + 4.0 * y * y * y / 3.0 - y.powi(4) / 4.0,
    gx: 4.0 * x + 4.0 * y.powi(6),
    gy: -2.0 * y + 24.0 * x * y.powi(5) + 4.0 * y * y - y * y * y,
    hess: (4.0, 24.0 * y.powi(5), -2.0 + 120.0 * x * y.powi(4) + 8.0 * y - 3.0 * y * y)
);

#[derive(Debug)]
struct ToyBilinear;

scalar_payoff!(ToyBilinear, |x, y|
    value: x * y,
    gx: y,
    gy: x,
    hess: (0.0, 1.0, 0.0)
);

/// `f = x^2 - y^2 + xy`: strongly convex-strongly concave.
#[derive(Debug)]
struct ConcaveToy;

scalar_payoff!(ConcaveToy, |x, y|
    value: x * x - y * y + x * y,
    gx: 2.0 * x + y,
    gy: x - 2.0 * y,
    hess: (2.0, 1.0, -2.0)
);

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bilinear_coupled_ten() {
        let p = builtin("bilinear_coupled(10)").unwrap();
        assert_eq!(p.grad_x(&[0.0], &[1.0]).unwrap(), vec![10.0]);
        assert_eq!(p.lip_x(), 172.0);
        assert_eq!(p.lip_y(), 172.0);
        assert_eq!(p.name(), "bilinear_coupled(10)");
    }

    #[test]
    fn plain_bilinear_coupled_uses_eleven() {
        let p = builtin("bilinear_coupled").unwrap();
        assert_eq!(p.grad_x(&[0.0], &[1.0]).unwrap(), vec![11.0]);
    }

    #[test]
    fn unknown_name_lists_registry() {
        let err = builtin("nope").unwrap_err();
        let msg = err.to_string();
        assert!(
            msg.contains("forsaken") && msg.contains("toy_bilinear"),
            "{msg}"
        );
        assert!(builtin("bilinear_coupled(x)").is_err());
    }

    #[test]
    fn toy_origin_is_stationary() {
        let p = builtin("toy_bilinear").unwrap();
        assert_eq!(p.grad_x(&[0.0], &[0.0]).unwrap(), vec![0.0]);
        assert_eq!(p.grad_y(&[0.0], &[0.0]).unwrap(), vec![0.0]);
    }

    #[test]
    fn sixth_order_hessian_at_published_point() {
        let p = builtin("sixth_order").unwrap();
        let h = p.second_derivs(&[0.0], &[1.0]).unwrap().unwrap();
        let e1 = (-0.01_f64).exp();
        assert!((h.xx + 4989.0 / 500.0 * e1).abs() < 1e-12);
        assert!((h.xy * h.xy - 21609.0 / 625.0 * e1 * e1).abs() < 1e-12);
        assert!((h.yy + 77061.0 / 25000.0 * e1).abs() < 1e-12);
    }

    #[test]
    fn second_derivatives_match_gradient_differences() {
        let h = 1e-6;
        for name in [
            "forsaken",
            "bilinear_coupled(10)",
            "sixth_order",
            "polar_game",
            "kl_nonconcave",
            "convex_nonconcave",
            "wrong_smoothing",
            "concave_toy",
        ] {
            let p = builtin(name).unwrap();
            for &(x, y) in &[(0.3, -0.7), (-0.9, 0.2), (0.55, 0.95)] {
                let d = p.second_derivs(&[x], &[y]).unwrap().unwrap();
                let gx = |x: f64, y: f64| p.grad_x(&[x], &[y]).unwrap()[0];
                let gy = |x: f64, y: f64| p.grad_y(&[x], &[y]).unwrap()[0];
                let fd = [
                    (gx(x + h, y) - gx(x - h, y)) / (2.0 * h),
                    (gx(x, y + h) - gx(x, y - h)) / (2.0 * h),
                    (gy(x + h, y) - gy(x - h, y)) / (2.0 * h),
                    (gy(x, y + h) - gy(x, y - h)) / (2.0 * h),
                ];
                for (a, b) in [d.xx, d.xy, d.yx, d.yy].iter().zip(fd) {
                    assert!(
                        (a - b).abs() < 1e-6 * a.abs().max(1.0),
                        "{name} at ({x},{y}): {a} vs {b}"
                    );
                }
            }
        }
    }

    #[test]
    fn stationary_points_have_small_gradients() {
        for b in [
            Builtin::KlNonconcave,
            Builtin::ConvexNonconcave,
            Builtin::Forsaken,
        ] {
            let p = b.problem();
            let (x, y) = b.stationary_point();
            let gx = p.grad_x(&[x], &[y]).unwrap()[0];
            let gy = p.grad_y(&[x], &[y]).unwrap()[0];
            assert!(
                gx.abs() < 1e-3 && gy.abs() < 1e-3,
                "{}: {gx} {gy}",
                p.name()
            );
        }
    }
}
