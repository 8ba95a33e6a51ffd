use std::sync::Arc;

use approx::assert_abs_diff_eq;
use dsgda::problems::{registry_names, Builtin, Payoff};
use dsgda::{builtin, BoxSet, Error, MinimaxProblem, SmoothedState};
use proptest::prelude::*;

fn names() -> Vec<String> {
    registry_names()
        .iter()
        .map(|n| n.replace("(A)", "(10)"))
        .collect()
}

#[test]
fn registry_resolves_every_name() {
    for n in names() {
        let p = builtin(&n).unwrap();
        assert_eq!(p.dim_x(), 1);
        assert_eq!(p.dim_y(), 1);
        assert!(p.lip_x() > 0.0 && p.lip_y() > 0.0, "{n}");
    }
    assert_eq!(
        builtin("bilinear_coupled").unwrap().name(),
        "bilinear_coupled(11)"
    );
}

#[test]
fn unknown_problem_lists_the_registry() {
    match builtin("saddle_of_doom") {
        Err(Error::UnknownProblem { available, .. }) => {
            assert!(available.contains("kl_nonconcave"))
        }
        other => panic!("{other:?}"),
    }
    assert!(builtin("bilinear_coupled(nan)").is_err());
}

#[test]
fn analytic_gradients_match_central_differences() {
    for n in names() {
        let p = builtin(&n).unwrap();
        if !p.has_value() {
            assert!(matches!(
                p.fd_gradient_check(10, 1e-6, 0),
                Err(Error::GradientOnly(_))
            ));
            continue;
        }
        let e = p.fd_gradient_check(500, 1e-6, 1).unwrap();
        assert!(e <= 1e-6, "{n}: {e}");
    }
}

#[test]
fn gradient_only_problem_refuses_values() {
    let p = builtin("polar_game").unwrap();
    assert!(!p.has_value());
    assert!(matches!(
        p.value(&[0.1], &[0.2]),
        Err(Error::GradientOnly(_))
    ));
    assert!(p.grad_x(&[0.1], &[0.2]).is_ok());
}

#[test]
fn stationary_points_are_game_stationary() {
    for n in names() {
        let b = Builtin::parse(&n).unwrap();
        let p = b.problem();
        let (x, y) = b.stationary_point();
        let gx = p.grad_x(&[x], &[y]).unwrap()[0];
        let gy = p.grad_y(&[x], &[y]).unwrap()[0];
        assert!(gx.abs() < 1e-6 && gy.abs() < 1e-6, "{n}: ({gx}, {gy})");
    }
}

#[test]
fn regularized_function_and_gradients() {
    let p = builtin("concave_toy").unwrap();
    let s = SmoothedState::scalar(0.3, -0.4, 0.1, 0.2);
    let (r1, r2) = (5.0, 12.0);
    let f = 0.09 - 0.16 - 0.12;
    let want = f + 0.5 * r1 * 0.04 - 0.5 * r2 * 0.36;
    assert_abs_diff_eq!(
        p.eval_regularized(r1, r2, &s).unwrap(),
        want,
        epsilon = 1e-12
    );
    // f = x^2 - y^2 + xy
    assert_abs_diff_eq!(
        p.grad_regularized_x(r1, &s).unwrap()[0],
        0.6 - 0.4 + r1 * 0.2,
        epsilon = 1e-12
    );
    assert_abs_diff_eq!(
        p.grad_regularized_y(r2, &s).unwrap()[0],
        0.8 + 0.3 - r2 * (-0.6),
        epsilon = 1e-12
    );
}

#[test]
fn dimension_and_feasibility_errors() {
    let p = builtin("toy_bilinear").unwrap();
    assert!(matches!(
        p.value(&[0.0, 0.0], &[0.0]),
        Err(Error::DimensionMismatch { .. })
    ));
    assert!(matches!(
        p.check_feasible(&[2.0], &[0.0]),
        Err(Error::Infeasible(_))
    ));
}

#[test]
fn invalid_boxes_are_rejected() {
    assert!(matches!(
        BoxSet::new(vec![1.0], vec![0.0]),
        Err(Error::InvalidBox { .. })
    ));
    assert!(BoxSet::new(vec![0.0, 0.0], vec![1.0]).is_err());
}

#[derive(Debug)]
struct Quadratic;

impl Payoff for Quadratic {
    fn value(&self, x: &[f64], y: &[f64]) -> Option<f64> {
        Some(x.iter().map(|v| v * v).sum::<f64>() - y.iter().map(|v| v * v).sum::<f64>())
    }
    fn grad_x(&self, x: &[f64], _y: &[f64], out: &mut [f64]) {
        for (o, v) in out.iter_mut().zip(x) {
            *o = 2.0 * v;
        }
    }
    fn grad_y(&self, _x: &[f64], y: &[f64], out: &mut [f64]) {
        for (o, v) in out.iter_mut().zip(y) {
            *o = -2.0 * v;
        }
    }
}

#[test]
fn user_defined_problem_in_two_dimensions() {
    let xs = BoxSet::cube(-1.0, 1.0, 2).unwrap();
    let ys = BoxSet::cube(-1.0, 1.0, 3).unwrap();
    let p = MinimaxProblem::new("quad", xs, ys, Arc::new(Quadratic), 2.0, 2.0).unwrap();
    assert_eq!((p.dim_x(), p.dim_y()), (2, 3));
    assert!(p.fd_gradient_check(50, 1e-6, 3).unwrap() < 1e-8);
}

proptest! {
    #[test]
    fn projection_is_idempotent_and_feasible(
        lo in prop::collection::vec(-5.0f64..0.0, 1..4),
        w in prop::collection::vec(0.0f64..5.0, 4),
        p in prop::collection::vec(-20.0f64..20.0, 4),
    ) {
        let d = lo.len();
        let hi: Vec<f64> = lo.iter().zip(&w).map(|(a, b)| a + b).collect();
        let set = BoxSet::new(lo.clone(), hi.clone()).unwrap();
        let q = set.project(&p[..d]).unwrap();
        prop_assert!(set.contains(&q));
        prop_assert_eq!(set.project(&q).unwrap(), q.clone());
        for i in 0..d {
            prop_assert_eq!(q[i], p[i].clamp(lo[i], hi[i]));
        }
    }
}
