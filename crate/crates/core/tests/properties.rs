//! Property-based invariants for the presentation layer.

use proptest::prelude::*;
use tropdyn_core::presentation::{AffineTerm, MaxPlusPresentation, Rational, RationalMode};
use tropdyn_core::TropicalParam;

fn arb_rational() -> impl Strategy<Value = Rational> {
    (-4i64..=4, 1i64..=4).prop_map(|(n, d)| Rational::new(n, d))
}

fn arb_term(arity: usize) -> impl Strategy<Value = AffineTerm> {
    (
        -2.0f64..2.0,
        proptest::collection::vec(arb_rational(), arity),
    )
        .prop_map(|(offset, coeffs)| AffineTerm::new(offset, coeffs))
}

fn arb_presentation(arity: usize) -> impl Strategy<Value = MaxPlusPresentation> {
    (
        proptest::collection::vec(arb_term(arity), 1..4),
        proptest::collection::vec(arb_term(arity), 1..4),
    )
        .prop_map(move |(num, den)| MaxPlusPresentation::new(arity, num, den).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn prop_2_4_identity(pres in arb_presentation(2),
                         x0 in -3.0f64..3.0, x1 in -3.0f64..3.0,
                         ti in 0usize..3) {
        let t = TropicalParam::new([2.0, 10.0, 1000.0][ti]).unwrap();
        let x = [x0, x1];
        let deq = pres.eval_dequantized(t, &x).unwrap();
        // log mode is bit-identical (same code path)
        prop_assert_eq!(pres.eval_rational(t, &x, RationalMode::Log).unwrap(), deq);
        // linear path where representable
        let z = [t.pow(x0), t.pow(x1)];
        if let Ok(lin) = pres.eval_rational(t, &z, RationalMode::Linear) {
            if lin > 0.0 && lin.is_finite() {
                let via = t.log(lin);
                prop_assert!((via - deq).abs() <= 1e-9 * deq.abs().max(1.0));
            }
        }
    }

    #[test]
    fn dequantization_gap_bound(pres in arb_presentation(2),
                       x0 in -4.0f64..4.0, x1 in -4.0f64..4.0,
                       ti in 0usize..3) {
        let t = TropicalParam::new([2.0, 10.0, 1000.0][ti]).unwrap();
        let bound = (pres.components() as f64).ln() / t.get().ln();
        let x = [x0, x1];
        let d = (pres.eval_dequantized(t, &x).unwrap() - pres.eval_maxplus(&x).unwrap()).abs();
        prop_assert!(d <= bound + 1e-12);
    }

    #[test]
    fn lipschitz_certified(pres in arb_presentation(2),
                           a0 in -4.0f64..4.0, a1 in -4.0f64..4.0,
                           b0 in -4.0f64..4.0, b1 in -4.0f64..4.0) {
        let c = pres.stats().lipschitz;
        let da = (pres.eval_maxplus(&[a0, a1]).unwrap() - pres.eval_maxplus(&[b0, b1]).unwrap()).abs();
        let sup = (a0 - b0).abs().max((a1 - b1).abs());
        prop_assert!(da <= c * sup + 1e-9);
    }

    #[test]
    fn scale_pointwise_and_linear(pres in arb_presentation(2),
                                  n in 1u128..6,
                                  x0 in -2.0f64..2.0, x1 in -2.0f64..2.0) {
        let scaled = pres.scale(n).unwrap();
        let x = [x0, x1];
        prop_assert_eq!(scaled.eval_maxplus(&x).unwrap(), pres.eval_maxplus(&x).unwrap());
        let t = TropicalParam::new(7.0).unwrap();
        let z = [t.pow(x0), t.pow(x1)];
        if let (Ok(a), Ok(b)) = (
            pres.eval_rational(t, &z, RationalMode::Linear),
            scaled.eval_rational(t, &z, RationalMode::Linear),
        ) {
            prop_assert!((b - n as f64 * a).abs() <= 1e-9 * b.abs().max(1e-300));
        }
        prop_assert_eq!(scaled.components(), n * pres.components());
    }

    #[test]
    fn max_min_calculus_pointwise(p in arb_presentation(2), q in arb_presentation(2),
                                  x0 in -2.0f64..2.0, x1 in -2.0f64..2.0) {
        let x = [x0, x1];
        let pv = p.eval_maxplus(&x).unwrap();
        let qv = q.eval_maxplus(&x).unwrap();
        let mx = p.max2(&q).unwrap().eval_maxplus(&x).unwrap();
        let mn = p.min2(&q).unwrap().eval_maxplus(&x).unwrap();
        let sm = p.add(&q).unwrap().eval_maxplus(&x).unwrap();
        prop_assert!((mx - pv.max(qv)).abs() <= 1e-9);
        prop_assert!((mn - pv.min(qv)).abs() <= 1e-9);
        prop_assert!((sm - (pv + qv)).abs() <= 1e-9);
    }

    #[test]
    fn json_roundtrip(pres in arb_presentation(2)) {
        let text = serde_json::to_string(&pres).unwrap();
        let back: MaxPlusPresentation = serde_json::from_str(&text).unwrap();
        prop_assert_eq!(back, pres);
    }
}

/// |phi_t - phi| is non-increasing in t along an increasing t-grid, for
/// fixtures whose denominator is a single term (the gap then lives entirely
/// on the numerator side).
#[test]
fn monotone_sharpening() {
    let r = |n: i64, d: i64| Rational::new(n, d);
    let fixtures = vec![
        // max(0, x)
        MaxPlusPresentation::new(
            1,
            vec![AffineTerm::constant(0.0, 1), AffineTerm::new(0.0, vec![r(1, 1)])],
            vec![AffineTerm::constant(0.0, 1)],
        )
        .unwrap(),
        // max(x, -x) - y
        MaxPlusPresentation::new(
            2,
            vec![
                AffineTerm::new(0.0, vec![r(0, 1), r(1, 1)]),
                AffineTerm::new(0.0, vec![r(0, 1), r(-1, 1)]),
            ],
            vec![AffineTerm::new(0.0, vec![r(1, 1), r(0, 1)])],
        )
        .unwrap(),
        // max(x, x)
        MaxPlusPresentation::new(
            1,
            vec![AffineTerm::with_weight(0.0, vec![r(1, 1)], 2)],
            vec![AffineTerm::constant(0.0, 1)],
        )
        .unwrap(),
    ];
    let t_grid = [1.5, 2.0, 3.0, 5.0, 10.0, 30.0, 100.0, 1000.0];
    let mut rng = tropdyn_core::seeded_rng(31);
    use rand::Rng;
    for pres in &fixtures {
        for _ in 0..200 {
            let x: Vec<f64> = (0..pres.arity()).map(|_| rng.gen_range(-3.0..3.0)).collect();
            let phi = pres.eval_maxplus(&x).unwrap();
            let mut prev = f64::INFINITY;
            for &tv in &t_grid {
                let t = TropicalParam::new(tv).unwrap();
                let gap = (pres.eval_dequantized(t, &x).unwrap() - phi).abs();
                assert!(gap <= prev + 1e-12, "gap grew from {prev} to {gap} at t = {tv}");
                prev = gap;
            }
        }
    }
}
