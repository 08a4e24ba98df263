use jacobi_renorm::jacobi::JacobiWindow;
use jacobi_renorm::limitper::*;
use jacobi_renorm::poly::{HyperbolicPoly, PolySequence};
use jacobi_renorm::renorm::BranchVector;

fn t12() -> HyperbolicPoly {
    HyperbolicPoly::quadratic(12.0).unwrap()
}

#[test]
fn fixed_point_iteration_contracts() {
    let t = t12();
    let j0 = JacobiWindow::constant(0.5, 0.0, -512, 512).unwrap();
    let tr =
        iterate_fixed(&t, &BranchVector::minus(1), &j0, 8, -512..=512, &IterateOptions::default()).unwrap();
    assert_eq!(tr.iterates.len(), 9);
    eprintln!("{:?}\n{:?}", tr.step_distances, tr.empirical_ratio);
    assert!(tr.max_ratio_from(1) <= 0.14);
    let p0 = tr.last().p_at(0).unwrap();
    eprintln!("p0 = {p0}");
    let kappa = t.kappa_bound().max(t.glue_kappa_bound());
    let rep = split_check(&tr, 2, 1.0, kappa).unwrap();
    assert!(rep.pass, "{rep:?}");
}

#[test]
fn zero_steps() {
    let j0 = JacobiWindow::constant(0.5, 0.0, -512, 512).unwrap();
    let tr = iterate_fixed(&t12(), &BranchVector::minus(1), &j0, 0, -512..=512, &IterateOptions::default())
        .unwrap();
    assert_eq!(tr.iterates.len(), 1);
}

#[test]
fn weak_polynomial_needs_force() {
    let t = HyperbolicPoly::quadratic(3.0).unwrap();
    let j0 = JacobiWindow::constant(0.5, 0.0, -512, 512).unwrap();
    assert!(
        iterate_fixed(&t, &BranchVector::minus(1), &j0, 2, -512..=512, &IterateOptions::default()).is_err()
    );
    let opts = IterateOptions { force: true, ..Default::default() };
    assert!(iterate_fixed(&t, &BranchVector::minus(1), &j0, 2, -512..=512, &opts).is_ok());
}

#[test]
fn seed_independence() {
    let t = t12();
    let a = JacobiWindow::constant(0.5, 0.0, -512, 512).unwrap();
    let b = JacobiWindow::periodic(vec![0.45, 0.3], vec![0.1, -0.1], -512, 512).unwrap();
    let o = IterateOptions::default();
    let ta = iterate_fixed(&t, &BranchVector::minus(1), &a, 8, -512..=512, &o).unwrap();
    let tb = iterate_fixed(&t, &BranchVector::minus(1), &b, 8, -512..=512, &o).unwrap();
    let d = ta.last().entrywise_distance(tb.last()).unwrap();
    assert!(d.dp.max(d.dq) <= 2.0 * 0.14f64.powi(8), "{d:?}");
}

#[test]
fn tower_equal_polys_matches_fixed() {
    let t = t12();
    let j0 = JacobiWindow::constant(0.5, 0.0, -512, 512).unwrap();
    let ts = PolySequence::new(vec![t.clone(); 5]).unwrap();
    let pol = BranchPolicy::Fixed { delta: BranchVector::minus(1) };
    let o = IterateOptions::default();
    let a = iterate_sequence(&ts, &pol, &j0, -512..=512, &o).unwrap();
    let b = iterate_fixed(&t, &BranchVector::minus(1), &j0, 5, -512..=512, &o).unwrap();
    for (x, y) in a.iterates.iter().zip(&b.iterates) {
        let d = x.entrywise_distance(y).unwrap();
        assert!(d.dp.max(d.dq) < 1e-13);
    }
}

#[test]
fn mixed_tower_and_epsilon_sequence() {
    let t12 = t12();
    let t15 = HyperbolicPoly::quadratic(15.0).unwrap();
    let j0 = JacobiWindow::constant(0.5, 0.0, -512, 512).unwrap();
    let o = IterateOptions::default();
    let ts = PolySequence::new((0..8).map(|k| if k % 2 == 0 { t12.clone() } else { t15.clone() }).collect())
        .unwrap();
    let tr =
        iterate_sequence(&ts, &BranchPolicy::Fixed { delta: BranchVector::minus(1) }, &j0, -512..=512, &o)
            .unwrap();
    assert!(*tr.step_distances.last().unwrap() < 1e-6);
    let prof = ap_profile(tr.last(), &[2], 6, 3, 1.0).unwrap();
    assert!(prof.geometric, "{prof:?}");

    let same = PolySequence::new(vec![t12.clone(); 8]).unwrap();
    let eps = BranchPolicy::Sequence { eps: vec![-1, 1] };
    let a = iterate_sequence(&same, &eps, &j0, -512..=512, &o).unwrap();
    let b =
        iterate_sequence(&same, &BranchPolicy::Fixed { delta: BranchVector::minus(1) }, &j0, -512..=512, &o)
            .unwrap();
    assert!(*a.step_distances.last().unwrap() < 1e-6);
    let d = a.last().entrywise_distance(b.last()).unwrap();
    assert!(d.dp.max(d.dq) > 1e-3);
}

#[test]
fn ap_profile_of_fixed_point() {
    let t = t12();
    let j0 = JacobiWindow::constant(0.5, 0.0, -512, 512).unwrap();
    let tr =
        iterate_fixed(&t, &BranchVector::minus(1), &j0, 10, -512..=512, &IterateOptions::default()).unwrap();
    let prof = ap_profile(tr.last(), &[2], 8, 3, 1.0).unwrap();
    eprintln!("{prof:?}");
    assert!(prof.geometric);
    assert!(prof.kappa_envelope <= 0.14);
    for (&l, &r) in prof.layers.iter().zip(&prof.distances) {
        assert!(r <= 2.0 * 0.14f64.powi(l as i32));
    }
    let c = metric_constant(&prof, &[2; 12], 0.14);
    assert!(c.is_finite() && c <= 2.0);
}

#[test]
fn random_coefficients_are_not_geometric() {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
    let p: Vec<f64> = (0..1025).map(|_| rng.gen_range(0.1..0.5)).collect();
    let q: Vec<f64> = (0..1025).map(|_| rng.gen_range(-0.1..0.1)).collect();
    let tail = jacobi_renorm::jacobi::TailModel::truncate();
    let j = JacobiWindow::new(-512, q, p, tail.clone(), tail).unwrap();
    let prof = ap_profile(&j, &[2], 8, 3, 1.0).unwrap();
    assert!(!prof.geometric, "{prof:?}");
}

#[test]
fn spectrum_in_preimage_ladder() {
    let t = t12();
    let j0 = JacobiWindow::constant(0.5, 0.0, -512, 512).unwrap();
    let tr =
        iterate_fixed(&t, &BranchVector::minus(1), &j0, 5, -512..=512, &IterateOptions::default()).unwrap();
    for (n, j) in tr.iterates.iter().enumerate() {
        let eigs = periodic_closure_eigenvalues(j, 0, 256).unwrap();
        let ivs = t.preimage_intervals(n).unwrap();
        let dist = distance_to_union(&eigs, &ivs);
        assert!(dist <= 1e-3, "n={n} dist={dist}");
        let size = j.q_slice().iter().fold(0.0f64, |a, b| a.max(b.abs()))
            + 2.0 * j.p_slice().iter().fold(0.0f64, |a, b| a.max(*b));
        assert!(size <= 3.0);
    }
}
