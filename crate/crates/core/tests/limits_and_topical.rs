use proptest::prelude::*;
use surjdisp::certificate::{Sign, Verdict};
use surjdisp::certify::{certify_surjective, face_limit, CertifyOptions};
use surjdisp::generate::{random_max_plus, random_min_max, random_sup_pwa};
use surjdisp::mapexpr::normalize_topical;
use surjdisp::polynorm::{FaceLabel, PolyhedralNorm};
use surjdisp::raylimits::{classify_limit_at_infinity, classify_limit_numeric, LimitOutcome, NumericPolicy};
use surjdisp::sets::NodeSet;
use surjdisp::topical::{
    certify_subtopical, certify_topical, lower_limit, upper_limit, HypergraphQuery, LimitOptions, TopicalMethod,
    TopicalOptions,
};
use surjdisp::Rational;

use num_traits::Zero;

#[test]
fn exact_and_numeric_limits_agree_when_numeric_concludes() {
    let policy = NumericPolicy::default();
    let (mut compared, mut inconclusive) = (0usize, 0usize);
    for seed in 0..1000u64 {
        let n = 1 + (seed % 4) as usize;
        let f = random_sup_pwa(n, seed);
        let sup = PolyhedralNorm::sup(n);
        let zero = vec![Rational::zero(); n];
        for face in sup.enumerate_proper_faces().unwrap() {
            let exact = face_limit(&f, &face, &LimitOptions::default()).unwrap();
            let numeric =
                classify_limit_numeric(&f, &zero, &face.representative, &face.dual_representative, &policy).unwrap();
            match (&exact.outcome, &numeric.outcome) {
                (_, LimitOutcome::Inconclusive { .. }) => inconclusive += 1,
                (LimitOutcome::Finite { value: a }, LimitOutcome::Finite { value: b }) => {
                    let (a, b) = (a.to_f64(), b.to_f64());
                    assert!((a - b).abs() <= 1e-6 * a.abs().max(1.0), "seed {seed} {}: {a} vs {b}", face.name());
                    compared += 1;
                }
                (a, b) => {
                    assert_eq!(a, b, "seed {seed} face {}", face.name());
                    compared += 1;
                }
            }
        }
    }
    assert!(compared > 10 * inconclusive, "{compared} compared, {inconclusive} inconclusive");
}

fn topts() -> TopicalOptions {
    TopicalOptions::default()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn variation_face_limits_match_coordinate_limits(seed in 0u64..100_000, n in 2usize..=4) {
        let t = random_min_max(n, seed);
        let f = normalize_topical(&t).unwrap();
        let norm = PolyhedralNorm::variation(n);
        let opts = LimitOptions::default();
        for face in norm.enumerate_proper_faces().unwrap() {
            let Some(FaceLabel::Variation { top, bottom }) = face.label.clone() else { panic!("unlabelled face") };
            let lhs = face_limit(&f, &face, &opts).unwrap().is_minus_infinity();
            let rhs = lower_limit(&t, top, &opts).unwrap().is_minus_infinity()
                || upper_limit(&t, bottom, &opts).unwrap().is_plus_infinity();
            prop_assert_eq!(lhs, rhs, "face {}", face.name());
        }
    }

    #[test]
    fn hyperarcs_persist_under_larger_tails(seed in 0u64..100_000, n in 2usize..=4, minus in any::<bool>()) {
        let t = random_min_max(n, seed);
        let sign = if minus { Sign::Minus } else { Sign::Plus };
        let h = HypergraphQuery::new(&t, sign, LimitOptions::default()).unwrap();
        for j in NodeSet::nonempty_subsets(n) {
            for i in j.complement(n).iter() {
                if !h.has_hyperarc(j, i).unwrap() {
                    continue;
                }
                for bigger in NodeSet::nonempty_subsets(n) {
                    if j.is_subset(bigger) && !bigger.contains(i) {
                        prop_assert!(h.has_hyperarc(bigger, i).unwrap(), "({j},{i}) but not ({bigger},{i})");
                    }
                }
            }
        }
    }

    #[test]
    fn topical_methods_agree(seed in 0u64..100_000, n in 2usize..=4, max_plus in any::<bool>()) {
        let t = if max_plus { random_max_plus(n, seed) } else { random_min_max(n, seed) };
        let base = certify_topical(&t, TopicalMethod::Hypergraph, &topts()).unwrap();
        let reach = certify_topical(&t, TopicalMethod::HypergraphReach, &topts()).unwrap();
        prop_assert_eq!(base.verdict, reach.verdict);
        prop_assert!(base.limit_table.len() <= 2 * ((1 << n) - 1));
        prop_assert!(reach.limit_table.len() <= 2 * (1 << n) * n * n);
        if max_plus {
            let convex = certify_topical(&t, TopicalMethod::Convex, &topts()).unwrap();
            prop_assert_eq!(convex.verdict, base.verdict);
            prop_assert!(convex.limit_table.len() <= 4 * n * n);
        }
        let scc = certify_topical(&t, TopicalMethod::StronglyConnectedSufficient, &topts()).unwrap();
        if scc.verdict == Verdict::Surjective {
            prop_assert_eq!(base.verdict, Verdict::Surjective);
        }
        let normalized = certify_surjective(&normalize_topical(&t).unwrap(), &PolyhedralNorm::variation(n), &CertifyOptions::default()).unwrap();
        prop_assert_eq!(normalized.verdict, base.verdict);
    }

    #[test]
    fn subtopical_agrees_with_sup_face_limits(seed in 0u64..100_000, n in 1usize..=4, scale in 1i64..=4) {
        let t = random_min_max(n, seed).scaled(surjdisp::scalar::ratio(scale, 4));
        prop_assert!(t.flags().subtopical);
        let sub = certify_subtopical(&t, &topts()).unwrap();
        prop_assert_eq!(sub.limit_table.len(), 2 * ((1 << n) - 1));
        let sup = certify_surjective(&t, &PolyhedralNorm::sup(n), &CertifyOptions::default()).unwrap();
        prop_assert_eq!(sub.verdict, sup.verdict);
    }

    #[test]
    fn ray_pairings_of_nonexpansive_maps_never_increase(seed in 0u64..100_000, n in 1usize..=3) {
        let f = random_sup_pwa(n, seed);
        let sup = PolyhedralNorm::sup(n);
        let zero = vec![Rational::zero(); n];
        for face in sup.enumerate_proper_faces().unwrap() {
            let g = surjdisp::raylimits::restrict_to_ray(&f, &zero, &face.representative, &face.dual_representative).unwrap();
            prop_assert!(g.is_nonincreasing() && g.is_continuous());
            let v = classify_limit_at_infinity(&g).unwrap();
            prop_assert!(!v.is_inconclusive());
        }
    }
}
