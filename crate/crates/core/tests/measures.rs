use approx::assert_abs_diff_eq;
use dsgda::measures::{
    classify, classify_in, gs_residual, os_residual, ClassifyOpts, OutcomeKind, StationarityReport,
};
use dsgda::oracle::GridSpec;
use dsgda::solvers::{run_method, Method, StopMode, Termination};
use dsgda::{builtin, Error, SmoothedState, StoppingRule, Trajectory};

#[test]
fn gs_residual_projects_onto_the_normal_cone() {
    // f = xy on [-1, 1]^2: grad_x = y, grad_y = x
    let p = builtin("toy_bilinear").unwrap();
    let (gx, gy) = gs_residual(&p, &[0.3], &[-0.4]).unwrap();
    assert_abs_diff_eq!(gx, 0.4, epsilon = 1e-15);
    assert_abs_diff_eq!(gy, 0.3, epsilon = 1e-15);
    // at x = 1 a negative gradient points out of the box and is absorbed
    let (gx, _) = gs_residual(&p, &[1.0], &[-0.4]).unwrap();
    assert_eq!(gx, 0.0);
    let (gx, _) = gs_residual(&p, &[-1.0], &[-0.4]).unwrap();
    assert_abs_diff_eq!(gx, 0.4, epsilon = 1e-15);
}

#[test]
fn gs_residual_rejects_infeasible_points() {
    let p = builtin("toy_bilinear").unwrap();
    assert!(matches!(
        gs_residual(&p, &[1.5], &[0.0]),
        Err(Error::Infeasible(_))
    ));
}

#[test]
fn os_residual_of_a_convex_concave_problem() {
    // max_y (x^2 - y^2 + xy) = x^2 + x^2/4 on the interior, minimized at 0
    let p = builtin("concave_toy").unwrap();
    let g = GridSpec::default();
    assert!(os_residual(&p, 4.0, 0.0, &g).unwrap() <= 1e-5);
    // prox of phi(x) = 5x^2/4 with weight r1: x* = r1 x_hat / (5/2 + r1)
    let want = 0.5 - 4.0 * 0.5 / 6.5;
    assert_abs_diff_eq!(os_residual(&p, 4.0, 0.5, &g).unwrap(), want, epsilon = 2e-5);
}

#[test]
fn os_residual_needs_values() {
    let p = builtin("polar_game").unwrap();
    assert!(matches!(
        os_residual(&p, 1.0, 0.0, &GridSpec::default()),
        Err(Error::Unsupported(_))
    ));
}

#[test]
fn stationarity_report_bundles_both_measures() {
    let p = builtin("kl_nonconcave").unwrap();
    let g = GridSpec::default();
    let r = StationarityReport::evaluate(&p, &[0.0], &[0.0], Some((20.0, &g))).unwrap();
    assert_eq!((r.gs_x, r.gs_y), (0.0, 0.0));
    assert!(r.os.unwrap() <= 1e-5);
    assert!(StationarityReport::evaluate(&p, &[0.0], &[0.0], None)
        .unwrap()
        .os
        .is_none());
}

fn traj(points: &[(f64, f64)], res: f64) -> Trajectory {
    Trajectory {
        iters: (0..points.len() as u64).collect(),
        states: points
            .iter()
            .map(|&(x, y)| SmoothedState::scalar(x, y, x, y))
            .collect(),
        residuals: vec![(res, res); points.len()],
        termination: Termination::MaxIters,
        iterations: points.len() as u64 - 1,
    }
}

#[test]
fn classification_of_synthetic_trajectories() {
    let opts = ClassifyOpts::default();
    let circle: Vec<(f64, f64)> = (0..400)
        .map(|k| {
            let a = k as f64 * std::f64::consts::TAU / 40.0;
            (0.5 * a.cos(), 0.5 * a.sin())
        })
        .collect();
    let c = classify(&traj(&circle, 0.1), &opts);
    assert_eq!(c.kind, OutcomeKind::LimitCycle);
    assert_eq!(c.loop_length, Some(40));

    let mut t = traj(&[(0.3, 0.2); 20], 0.1);
    t.residuals.last_mut().unwrap().0 = 1e-9;
    t.residuals.last_mut().unwrap().1 = 1e-9;
    assert_eq!(classify(&t, &opts).kind, OutcomeKind::Converged);

    let drift: Vec<(f64, f64)> = (0..400).map(|k| (k as f64 * 1e-3, 0.0)).collect();
    assert_eq!(
        classify(&traj(&drift, 0.1), &opts).kind,
        OutcomeKind::MaxIters
    );
}

#[test]
fn boundary_stall_needs_the_boundary() {
    let p = builtin("toy_bilinear").unwrap();
    let opts = ClassifyOpts::default();
    let stuck = traj(&[(1.0, 0.4); 50], 0.3);
    assert_eq!(
        classify_in(&p, &stuck, &opts).kind,
        OutcomeKind::BoundaryStall
    );
    let interior = traj(&[(0.2, 0.4); 50], 0.3);
    assert_eq!(
        classify_in(&p, &interior, &opts).kind,
        OutcomeKind::MaxIters
    );
}

#[test]
fn gda_on_the_bilinear_toy_cycles() {
    let p = builtin("toy_bilinear").unwrap();
    let m = Method::Gda { c: 0.1, alpha: 0.1 };
    let stop = StoppingRule::new(1e-9, 5000, StopMode::Step).unwrap();
    let t = run_method(&p, &m, &SmoothedState::scalar(0.5, 0.5, 0.5, 0.5), &stop, 1).unwrap();
    let c = classify_in(&p, &t, &ClassifyOpts::default());
    assert_eq!(c.kind, OutcomeKind::LimitCycle);
    assert!(c.loop_length.unwrap() >= 10);
}
