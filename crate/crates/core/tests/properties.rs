use jacobi_renorm::jacobi::JacobiWindow;
use jacobi_renorm::poly::HyperbolicPoly;
use jacobi_renorm::renorm::*;
use proptest::prelude::*;

fn periodic_seed() -> impl Strategy<Value = JacobiWindow> {
    (1usize..5)
        .prop_flat_map(|m| (prop::collection::vec(0.2..0.45f64, m), prop::collection::vec(-0.1..0.1f64, m)))
        .prop_map(|(p, q)| JacobiWindow::periodic(p, q, -300, 300).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn branch_vector_roundtrip(v in prop::collection::vec(prop::bool::ANY, 1..12)) {
        let b = BranchVector::new(v.iter().map(|&x| if x { 1 } else { -1 }).collect()).unwrap();
        let s = b.to_string();
        prop_assert_eq!(s.parse::<BranchVector>().unwrap(), b);
    }

    #[test]
    fn recurrence_holds_for_periodic_seeds(seed in periodic_seed(), rho in 12.0..40.0f64) {
        let t = HyperbolicPoly::quadratic(rho).unwrap();
        let frame = MonicFrame::new(&seed, &t).unwrap();
        for b in [BranchVector::minus(1), BranchVector::plus(1)] {
            let bl = blocks(&frame.seed, -8..=8, &b, &frame.poly).unwrap();
            prop_assert!(check_recurrence(&bl, &frame.seed, &frame.poly).unwrap() <= 1e-12);
        }
    }

    #[test]
    fn output_stays_in_unit_interval(seed in periodic_seed()) {
        let t = HyperbolicPoly::quadratic(12.0).unwrap();
        let j = renormalize(&seed, &BranchVector::minus(1), &t, -40..=40).unwrap();
        let size = j.q_slice().iter().fold(0.0f64, |a, b| a.max(b.abs()))
            + 2.0 * j.p_slice().iter().fold(0.0f64, |a, b| a.max(*b));
        prop_assert!(size <= 3.0);
        prop_assert!(j.q_slice().iter().all(|q| q.abs() < 1e-12));
    }
}
