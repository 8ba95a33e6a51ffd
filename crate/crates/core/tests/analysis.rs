use approx::assert_abs_diff_eq;
use dsgda::analysis::{
    check_descent_params, constants, feasibility_point, feasibility_scan, interaction_dominance,
    kl_ratio_scan, rho_at, smoothing_precondition, universal_params, weak_mvi_rho, KlSpec, Side,
};
use dsgda::oracle::GridSpec;
use dsgda::problems::KL_NONCONCAVE_TAU;
use dsgda::{builtin, AlgoParams, Error};

#[test]
fn constants_on_the_reference_example() {
    let k = constants(1.0, 1.0, 2.0, 4.0, 0.1, 0.1).unwrap();
    assert_abs_diff_eq!(k.sigma1, 2.0, epsilon = 1e-12);
    assert_abs_diff_eq!(k.sigma2, 2.0, epsilon = 1e-12);
    assert_abs_diff_eq!(k.sigma5, 4.0 / 3.0, epsilon = 1e-12);
    assert_abs_diff_eq!(k.l_d, 7.0, epsilon = 1e-12);
    assert_abs_diff_eq!(k.sigma6, 14.0, epsilon = 1e-12);
}

#[test]
fn constants_check_their_precondition() {
    assert!(matches!(
        smoothing_precondition(1.0, 1.0, 1.0, 4.0),
        Err(Error::Precondition(_))
    ));
    assert!(matches!(
        constants(1.0, 1.0, 2.0, 2.5, 0.1, 0.1),
        Err(Error::Precondition(_))
    ));
}

#[test]
fn universal_parameters_satisfy_the_descent_conditions() {
    for l in [0.1, 0.5, 1.0, 3.0, 10.0] {
        let p = universal_params(l).unwrap();
        assert_eq!(p.r1, p.r2);
        assert_eq!(p.beta, p.mu);
        let rep = check_descent_params(l, 1.0, &p);
        assert!(
            rep.passed(),
            "l = {l}: {:?}",
            rep.failures().collect::<Vec<_>>()
        );
    }
    assert!(universal_params(0.0).is_err());
}

#[test]
fn oversized_steps_fail_the_descent_conditions() {
    let p = AlgoParams::new(1.0, 1.0, 0.5, 0.5, 20.0, 20.0).unwrap();
    let rep = check_descent_params(1.0, 1.0, &p);
    assert!(!rep.passed());
    assert!(rep.into_result().is_err());
}

#[test]
fn feasibility_scan_is_order_independent() {
    let b = 2e-4;
    let fwd = feasibility_scan(1.0, b, b, (0.0, 50.0), (0.0, 50.0), 41);
    let rev = feasibility_scan(1.0, b, b, (50.0, 0.0), (50.0, 0.0), 41);
    for i in 0..41 {
        for j in 0..41 {
            assert_eq!(fwd.feasible[i][j], rev.feasible[40 - i][40 - j]);
        }
    }
    assert!(fwd.count_feasible() > 0);
    for (i, &t1) in fwd.t1.iter().enumerate() {
        for (j, &t2) in fwd.t2.iter().enumerate() {
            assert_eq!(
                fwd.feasible[i][j],
                feasibility_point(1.0, b, b, t1, t2).feasible
            );
        }
    }
}

#[test]
fn weak_mvi_rho_on_the_coupled_bilinear_problem() {
    let p = builtin("bilinear_coupled(10)").unwrap();
    let r = rho_at(&p, (&[0.0], &[0.0]), &[0.0], &[1.0])
        .unwrap()
        .unwrap();
    assert_abs_diff_eq!(r, -4.0 / 89.0, epsilon = 1e-12);
    assert_eq!(rho_at(&p, (&[0.0], &[0.0]), &[0.0], &[0.0]).unwrap(), None);
    let scan = weak_mvi_rho(&p, (0.0, 0.0), &GridSpec::new(81, 1).unwrap()).unwrap();
    assert_abs_diff_eq!(scan.threshold, -1.0 / 344.0, epsilon = 1e-15);
    assert!(scan.violates() && scan.min_rho <= r);
}

#[test]
fn polar_game_rho_on_the_axis() {
    let p = builtin("polar_game").unwrap();
    let r = rho_at(&p, (&[0.0], &[0.0]), &[0.8], &[0.0])
        .unwrap()
        .unwrap();
    assert_abs_diff_eq!(r, -0.3722, epsilon = 1e-3);
}

#[test]
fn kl_modulus_of_the_kl_example() {
    let p = builtin("kl_nonconcave").unwrap();
    let scan = kl_ratio_scan(&p, Side::Dual, 0.5, &GridSpec::new(201, 2).unwrap()).unwrap();
    assert!(scan.tau >= KL_NONCONCAVE_TAU, "{}", scan.tau);
    assert!(KlSpec::new(1.5, 1.0, Side::Dual).is_err());
}

#[test]
fn interaction_dominance_is_symmetric_on_the_bilinear_toy() {
    let p = builtin("toy_bilinear").unwrap();
    let (dx, dy) = interaction_dominance(&p, 0.0, 0.0, 1.0).unwrap();
    assert_abs_diff_eq!(dx, dy, epsilon = 1e-12);
}
