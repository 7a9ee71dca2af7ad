use num_traits::Zero;
use proptest::prelude::*;
use surjdisp::certificate::Verdict;
use surjdisp::certify::{certify_surjective, certify_unique, recession_expr, CertifyOptions};
use surjdisp::generate::{random_homogeneous_sup, random_min_max, random_sup_pwa};
use surjdisp::oracle::{
    avoided_cone_shifts, minimal_displacement_estimate, multistart_fixed_points, random_point, OracleOptions,
};
use surjdisp::polynorm::PolyhedralNorm;
use surjdisp::scalar::ratio;
use surjdisp::Rational;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn opts() -> CertifyOptions {
    CertifyOptions::default()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn pwa_certificates_are_decisive_and_complete(seed in 0u64..100_000, n in 1usize..=3) {
        let f = random_sup_pwa(n, seed);
        let c = certify_surjective(&f, &PolyhedralNorm::sup(n), &opts()).unwrap();
        prop_assert!(matches!(c.verdict, Verdict::Surjective | Verdict::NotSurjective));
        prop_assert_eq!(c.limit_table.len(), 3usize.pow(n as u32) - 1);
        match c.verdict {
            Verdict::Surjective => prop_assert!(c.limit_table.iter().all(|e| e.verdict.is_minus_infinity())),
            _ => prop_assert!(!c.failing_faces().is_empty()),
        }
    }

    #[test]
    fn homogeneous_surjectivity_matches_uniqueness_at_zero(seed in 0u64..100_000, n in 1usize..=3) {
        let g = random_homogeneous_sup(n, seed);
        let sup = PolyhedralNorm::sup(n);
        let s = certify_surjective(&g, &sup, &opts()).unwrap().verdict;
        let u = certify_unique(&g, &sup, &vec![Rational::zero(); n], &opts()).unwrap().verdict;
        prop_assert_eq!(s == Verdict::Surjective, u == Verdict::Unique);
    }

    #[test]
    fn recession_maps_are_positively_homogeneous(seed in 0u64..100_000, a in 1i64..=9, b in 1i64..=9) {
        let f = random_sup_pwa(3, seed);
        let r = recession_expr(&f).unwrap();
        let x = vec![ratio(3, 2), ratio(-5, 3), ratio(7, 4)];
        let c = ratio(a, b);
        let cx: Vec<Rational> = x.iter().map(|v| v * &c).collect();
        let lhs = r.evaluate_exact(&cx).unwrap();
        let rhs: Vec<Rational> = r.evaluate_exact(&x).unwrap().iter().map(|v| v * &c).collect();
        prop_assert_eq!(lhs, rhs);
    }

    #[test]
    fn averaged_residuals_never_grow(seed in 0u64..100_000, n in 1usize..=3) {
        let f = random_sup_pwa(n, seed);
        let sup = PolyhedralNorm::sup(n);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let u = random_point(&mut rng, n, 5.0);
        let start = random_point(&mut rng, n, 50.0);
        let o = OracleOptions { max_iter: 5_000, ..OracleOptions::default() };
        let r = minimal_displacement_estimate(&f, &u, &sup, Some(&start), &o).unwrap();
        prop_assert!(r.max_relative_increase <= 1e-12, "increase {}", r.max_relative_increase);
        prop_assert!(r.history.windows(2).all(|w| w[1].1 <= w[0].1 + 1e-12 * w[0].1.max(1.0)));
    }

    #[test]
    fn uniqueness_verdicts_survive_multistart(seed in 0u64..100_000) {
        let t = random_min_max(2, seed).scaled(ratio(1, 2));
        let sup = PolyhedralNorm::sup(2);
        // Halved topical maps are contractions: one fixed point, which the certifier cannot contradict.
        if let Ok(c) = certify_unique(&t, &sup, &[ratio(0, 1), ratio(0, 1)], &opts()) {
            prop_assert_eq!(c.verdict, Verdict::Unique);
        }
        let pts = multistart_fixed_points(&t, &sup, 16, seed, 20.0, &OracleOptions::default()).unwrap();
        prop_assert_eq!(pts.len(), 1);
    }
}

#[test]
fn avoided_cone_samples_show_a_displacement_floor() {
    let o = OracleOptions::default();
    let mut seen = 0;
    for seed in 0..60u64 {
        let f = random_sup_pwa(2, seed);
        let sup = PolyhedralNorm::sup(2);
        let c = certify_surjective(&f, &sup, &opts()).unwrap();
        if c.verdict != Verdict::NotSurjective {
            continue;
        }
        seen += 1;
        for u in avoided_cone_shifts(&f, &sup, &c, 5, seed).unwrap() {
            let r = minimal_displacement_estimate(&f, &u, &sup, None, &o).unwrap();
            assert!(r.floor().is_some_and(|v| v > 0.0), "seed {seed}: u={u:?} gave {:?}", r.verdict);
        }
    }
    assert!(seen > 5);
}
