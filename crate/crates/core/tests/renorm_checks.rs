use jacobi_renorm::jacobi::{JacobiWindow, TailModel};
use jacobi_renorm::poly::HyperbolicPoly;
use jacobi_renorm::renorm::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn t12() -> HyperbolicPoly {
    HyperbolicPoly::quadratic(12.0).unwrap()
}

fn half_constant() -> JacobiWindow {
    JacobiWindow::constant(0.5, 0.0, -400, 400).unwrap()
}

fn asym_seed() -> JacobiWindow {
    JacobiWindow::periodic(vec![0.45, 0.45], vec![0.1, -0.1], -400, 400).unwrap()
}

#[test]
fn renorm_equation_constant_seed() {
    let t = t12();
    let seed = half_constant();
    let j = renormalize(&seed, &BranchVector::minus(1), &t, -700..=700).unwrap();
    let opts = SectionCheck::new(&t, 0);
    let r = check_renorm_equation(&j, &seed, &t, &opts).unwrap();
    assert!(r.residual <= 1e-8, "{r:?}");
    assert!(r.truncation_consistent, "{r:?}");
}

#[test]
fn renorm_equation_detects_wrong_glue() {
    let t = t12();
    let seed = half_constant();
    let j = renormalize(&seed, &BranchVector::minus(1), &t, -700..=700).unwrap();
    let mut p = j.p_slice().to_vec();
    // glue entries sit at even sites
    let i = (2 - j.offset()) as usize;
    p[i] *= 1.01;
    let bad = j.with_entries(j.q_slice().to_vec(), p).unwrap();
    let opts = SectionCheck::new(&t, 0);
    let r = check_renorm_equation(&bad, &seed, &t, &opts).unwrap();
    assert!(r.residual >= 1e-4, "{r:?}");
}

#[test]
fn renorm_equation_large_z_scaling() {
    let t = t12();
    let seed = asym_seed();
    let j = renormalize(&seed, &BranchVector::minus(1), &t, -700..=700).unwrap();
    let mut opts = SectionCheck::new(&t, 0);
    opts.z_samples = vec![1e3, -1e3];
    let r = check_renorm_equation(&j, &seed, &t, &opts).unwrap();
    assert!(r.residual < 1e-12, "{r:?}");
}

#[test]
fn polynomial_form() {
    let t = t12();
    for seed in [half_constant(), asym_seed()] {
        let j = renormalize(&seed, &BranchVector::minus(1), &t, -100..=100).unwrap();
        let (r1, r2) = check_polynomial_form(&j, &seed, &t, &SectionCheck::new(&t, 0)).unwrap();
        assert!(r1 <= 1e-10 && r2 <= 1e-10, "{r1} {r2}");
    }
}

#[test]
fn polynomial_form_cubic() {
    let t = HyperbolicPoly::scaled_chebyshev(3, 0.1).unwrap().to_unit_interval().unwrap();
    let seed = asym_seed();
    for b in BranchVector::all(2) {
        let j = renormalize(&seed, &b, &t, -150..=150).unwrap();
        let (r1, r2) = check_polynomial_form(&j, &seed, &t, &SectionCheck::new(&t, 0)).unwrap();
        assert!(r1 <= 1e-10 && r2 <= 1e-10, "{b}: {r1} {r2}");
    }
}

#[test]
fn zero_diagonal_for_quadratic() {
    let t = t12();
    let seed = JacobiWindow::periodic(vec![0.3, 0.6, 0.4], vec![0.0; 3], -200, 200).unwrap();
    let j = renormalize(&seed, &BranchVector::minus(1), &t, -60..=60).unwrap();
    assert!(j.q_slice().iter().all(|q| q.abs() < 1e-13));
}

#[test]
fn top_left_entry_equals_q() {
    let t = HyperbolicPoly::from_coeffs(vec![-6.0, 0.5, 7.0]).unwrap().to_unit_interval().unwrap();
    let m = t.to_monic().unwrap();
    let seed = asym_seed().scaled(m.xi());
    let bl = blocks(&seed, -4..=4, &BranchVector::minus(1), &m).unwrap();
    for b in &bl {
        assert!((b.diag[0] - m.q()).abs() < 1e-10 * m.xi());
    }
}

#[test]
fn periodic_seed_gives_dm_periodic_output() {
    let t = t12();
    let seed = JacobiWindow::periodic(vec![0.3, 0.6, 0.4], vec![0.1, -0.2, 0.05], -200, 200).unwrap();
    let j = renormalize(&seed, &BranchVector::minus(1), &t, 0..=4 * 6 + 6).unwrap();
    for k in 0..4 * 6 {
        assert!((j.p_at(k).unwrap() - j.p_at(k + 6).unwrap()).abs() < 1e-12);
        assert!((j.q_at(k).unwrap() - j.q_at(k + 6).unwrap()).abs() < 1e-12);
    }
    match j.tail_right() {
        TailModel::Periodic { p, .. } => assert_eq!(p.len(), 6),
        other => panic!("unexpected tail {other:?}"),
    }
}

#[test]
fn translation_covariance() {
    let t = t12();
    let seed = JacobiWindow::from_fn(
        -300,
        300,
        |k| 0.4 + 0.05 * ((k as f64) * 0.7).sin(),
        |k| 0.1 * ((k as f64) * 1.3).cos(),
        TailModel::Constant { p: 0.4, q: 0.0 },
        TailModel::Constant { p: 0.4, q: 0.0 },
    )
    .unwrap();
    let m = 3;
    let b0 = branch_values(&seed.shift(m), 2, &BranchVector::minus(1), &t).unwrap();
    let b1 = branch_values(&seed, 2 + m, &BranchVector::minus(1), &t).unwrap();
    assert!((b0[0] - b1[0]).abs() < 1e-13 * b1[0].abs());
    let lhs = renormalize(&seed.shift(m), &BranchVector::minus(1), &t, -40..=40).unwrap();
    let rhs = renormalize(&seed, &BranchVector::minus(1), &t, -40 + 2 * m..=40 + 2 * m).unwrap().shift(2 * m);
    let d = lhs.entrywise_distance(&rhs).unwrap();
    assert!(d.dp.max(d.dq) < 1e-13, "{d:?}");
}

#[test]
fn chain_rule() {
    let t1 = HyperbolicPoly::quadratic(12.0).unwrap();
    let t2 = HyperbolicPoly::quadratic(15.0).unwrap();
    let t21 = HyperbolicPoly::compose(&t2, &t1).unwrap();
    let seed = asym_seed();
    let minus = BranchVector::minus(1);
    let inner = renormalize(&seed, &minus, &t2, -400..=400).unwrap();
    let twice = renormalize(&inner, &minus, &t1, -300..=300).unwrap();
    let direct = renormalize(&seed, &BranchVector::minus(3), &t21, -300..=300).unwrap();
    let d = twice.entrywise_distance_on(&direct, -200, 200).unwrap();
    assert!(d.dp.max(d.dq) <= 1e-8, "{d:?}");
}

#[test]
fn recurrence_on_blocks() {
    let t = t12().to_monic().unwrap();
    let seed = asym_seed().scaled(12.0);
    for b in [BranchVector::minus(1), BranchVector::plus(1)] {
        let bl = blocks(&seed, -10..=10, &b, &t).unwrap();
        assert!(check_recurrence(&bl, &seed, &t).unwrap() <= 1e-12);
        for block in &bl {
            let (_, r1, r2) = sigma_s(block, &seed, &t).unwrap();
            assert!(r1 <= 1e-9 && r2 <= 1e-9);
        }
    }
}

#[test]
fn sigma_for_cubic_branches() {
    let t = HyperbolicPoly::scaled_chebyshev(3, 0.1).unwrap().to_monic().unwrap();
    let seed = asym_seed().scaled(t.xi());
    for b in BranchVector::all(2) {
        let bl = blocks(&seed, -3..=3, &b, &t).unwrap();
        assert!(check_recurrence(&bl, &seed, &t).unwrap() <= 1e-12);
        for block in &bl {
            let (m, r1, r2) = sigma_s(block, &seed, &t).unwrap();
            assert!(m.weights.iter().all(|w| *w > 0.0));
            assert!(r1 <= 1e-9 && r2 <= 1e-9, "{b}: {r1} {r2}");
        }
    }
}

#[test]
fn enumerate_quadratic_branches() {
    let t = t12();
    let sym = enumerate_branches(&half_constant(), &t, -100..=100).unwrap();
    assert_eq!(sym.len(), 2);
    // symmetric seed: the two solutions differ by a one-site shift
    let d = sym[0].1.entrywise_distance(&sym[1].1.shift(-1)).unwrap();
    assert!(d.dp.max(d.dq) < 1e-12);
    let asym = enumerate_branches(&asym_seed(), &t, -700..=700).unwrap();
    let d = asym[0].1.entrywise_distance(&asym[1].1).unwrap();
    assert!(d.dp.max(d.dq) > 1e-6);
    for (_, j) in &asym {
        let r = check_renorm_equation(j, &asym_seed(), &t, &SectionCheck::new(&t, 0)).unwrap();
        assert!(r.residual <= 1e-8);
    }
}

#[test]
fn enumerate_cubic_branches() {
    let t = HyperbolicPoly::scaled_chebyshev(3, 0.1).unwrap().to_unit_interval().unwrap();
    let all = enumerate_branches(&asym_seed(), &t, -900..=900).unwrap();
    assert_eq!(all.len(), 4);
    for (b, j) in &all {
        let r = check_renorm_equation(j, &asym_seed(), &t, &SectionCheck::new(&t, 0)).unwrap();
        assert!(r.residual <= 1e-8, "{b}: {r:?}");
    }
}

#[test]
fn dual_branch() {
    let t = t12();
    for seed in [half_constant(), asym_seed()] {
        for b in [BranchVector::minus(1), BranchVector::plus(1)] {
            let r = dual_branch_check(&seed, &b, &t, -50..=50).unwrap();
            assert!(r <= 1e-9, "{b}: {r}");
        }
    }
    let cubic = HyperbolicPoly::scaled_chebyshev(3, 0.1).unwrap().to_unit_interval().unwrap();
    for b in BranchVector::all(2) {
        let r = dual_branch_check(&asym_seed(), &b, &cubic, -50..=50).unwrap();
        assert!(r <= 1e-9, "{b}: {r}");
    }
    let s = asym_seed();
    assert_eq!(s.reflect().reflect(), s);
}

#[test]
fn re0_identities() {
    let t = t12();
    let seed = asym_seed();
    let j = renormalize(&seed, &BranchVector::minus(1), &t, -200..=200).unwrap();
    assert!(check_re0(&j, &seed, &t, &default_z_samples(&t)).unwrap() <= 1e-10);
    let cubic = HyperbolicPoly::scaled_chebyshev(3, 0.1).unwrap().to_unit_interval().unwrap();
    let j = renormalize(&seed, &BranchVector::minus(2), &cubic, -200..=200).unwrap();
    assert!(check_re0(&j, &seed, &cubic, &default_z_samples(&cubic)).unwrap() <= 1e-8);
    // perturbing p₁ only affects the second-kind term
    let mut p = j.p_slice().to_vec();
    p[(1 - j.offset()) as usize] *= 1.5;
    let bad = j.with_entries(j.q_slice().to_vec(), p).unwrap();
    assert!(check_re0(&bad, &seed, &cubic, &default_z_samples(&cubic)).unwrap() > 1e-3);
}

#[test]
fn w_ratio_identity() {
    let t = t12();
    let seed = asym_seed();
    let j = renormalize(&seed, &BranchVector::minus(1), &t, -200..=200).unwrap();
    for z in [2.0, -3.0, 5.0] {
        let w = j.resolvent_matrix_w(z).unwrap();
        let ratio = j.resolvent_plus(z, 1).unwrap() / j.resolvent_minus(z, 0).unwrap();
        assert!((w[1][1] / w[0][0] - ratio).abs() < 1e-10 * ratio.abs());
    }
}

#[test]
fn random_seeds_contract() {
    let t = t12();
    let xi = 1.0;
    let kappa = t.kappa_bound();
    let glue_kappa = t.glue_kappa_bound();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let rand_seed = |rng: &mut ChaCha8Rng| {
        let p: Vec<f64> = (0..401).map(|_| rng.gen_range(0.2..0.45)).collect();
        let q: Vec<f64> = (0..401).map(|_| rng.gen_range(-0.1..0.1)).collect();
        JacobiWindow::new(
            -200,
            q,
            p,
            TailModel::Constant { p: 0.45, q: 0.0 },
            TailModel::Constant { p: 0.45, q: 0.0 },
        )
        .unwrap()
        .with_spectral_interval(-xi, xi)
    };
    for _ in 0..8 {
        let a = rand_seed(&mut rng);
        let b = rand_seed(&mut rng);
        let dist = a.entrywise_distance(&b).unwrap().opnorm_bound;
        let ja = renormalize(&a, &BranchVector::minus(1), &t, -150..=150).unwrap();
        let jb = renormalize(&b, &BranchVector::minus(1), &t, -150..=150).unwrap();
        for k in -150..=150i64 {
            let dp = (ja.p_at(k).unwrap() - jb.p_at(k).unwrap()).abs();
            let bound = if k.rem_euclid(2) == 0 { glue_kappa } else { kappa };
            assert!(dp <= bound * dist, "k={k} dp={dp} bound={}", bound * dist);
        }
    }
}
