use jacobi_renorm::jacobi::JacobiWindow;
use jacobi_renorm::limitper::{iterate_fixed, IterateOptions};
use jacobi_renorm::measures::*;
use jacobi_renorm::poly::HyperbolicPoly;
use jacobi_renorm::renorm::{default_z_samples, BranchVector};

fn fixed_point(t: &HyperbolicPoly, delta: BranchVector) -> JacobiWindow {
    let j0 = JacobiWindow::constant(0.5, 0.0, -512, 512).unwrap();
    let tr = iterate_fixed(t, &delta, &j0, 10, -512..=512, &IterateOptions::default()).unwrap();
    tr.last().clone()
}

#[test]
fn balanced_matches_right_half() {
    let t = HyperbolicPoly::quadratic(12.0).unwrap();
    let j = fixed_point(&t, BranchVector::minus(1));
    let dev = compare_fixedpoint_balanced(&t, 12, 32, &j).unwrap();
    eprintln!("balanced deviation {dev:e}");
    assert!(dev <= 1e-5);
}

#[test]
fn other_branch_is_negative_control() {
    let t = HyperbolicPoly::quadratic(12.0).unwrap();
    let j = fixed_point(&t, BranchVector::plus(1));
    let dev = compare_fixedpoint_balanced(&t, 12, 32, &j).unwrap();
    assert!(dev > 1e-2, "{dev:e}");
}

#[test]
fn ruelle_matches_reflected_left_half() {
    let t = HyperbolicPoly::quadratic(12.0).unwrap();
    let j = fixed_point(&t, BranchVector::minus(1));
    let e = ruelle_l2_eigen(&t, 16).unwrap();
    eprintln!("rho_ruelle {:.13}", e.rho_ruelle);
    let a = jacobi_from_measure(&e.measure, 32).unwrap();
    let b = left_half_reflected(&j, 32).unwrap();
    let dev = max_deviation(&a, &b);
    eprintln!("ruelle deviation {dev:e}");
    assert!(dev <= 1e-4);
    assert!(ruelle_eigen_residual(&t, &e).unwrap() <= 1e-9);
}

#[test]
fn balanced_renormalization_identity() {
    for t in [HyperbolicPoly::quadratic(12.0).unwrap(), HyperbolicPoly::scaled_chebyshev(3, 0.2).unwrap()] {
        let m = balanced_measure(&t, 8).unwrap();
        let r = balanced_renorm_identity(&t, &m, &default_z_samples(&t));
        assert!(r < 1e-10, "{r:e}");
    }
}

#[test]
fn cubic_moments_and_quadrature() {
    let t = HyperbolicPoly::scaled_chebyshev(3, 0.2).unwrap();
    let m = balanced_measure(&t, 7).unwrap();
    assert!(moment_stability(&t, &m, 8).unwrap() < 1e-10);
    let c = jacobi_from_measure(&m, 24).unwrap();
    assert!(within_exactness_margin(&m, 24));
    assert!(moment_consistency(&m, &c, t.xi()) < 1e-9);
}
