use nilwalk::decomposition::WeightDecomposition;
use nilwalk::filtration::weight_filtration;
use nilwalk::presets::{filiform3, free_nilpotent, heisenberg, unitriangular};
use nilwalk::scalar::{q, Q};
use nilwalk::LieAlgebra;
use proptest::prelude::*;

fn algebras() -> Vec<LieAlgebra> {
    vec![
        heisenberg(),
        filiform3(),
        unitriangular(4).unwrap(),
        free_nilpotent(2, 3).unwrap(),
    ]
}

fn rational(n: usize) -> impl Strategy<Value = Vec<Q>> {
    prop::collection::vec((-6i64..=6, 1i64..=4), n).prop_map(|v| v.into_iter().map(|(a, b)| q(a, b)).collect())
}

fn case() -> impl Strategy<Value = (usize, Vec<Q>, Vec<Q>, Vec<Q>)> {
    (0..4usize).prop_flat_map(|k| {
        let n = algebras()[k].dim();
        (Just(k), rational(n), rational(n), rational(n))
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn product_is_associative_over_rationals((k, x, y, z) in case()) {
        let g = &algebras()[k];
        let l = g.mul(&g.mul(&x, &y).unwrap(), &z).unwrap();
        let r = g.mul(&x, &g.mul(&y, &z).unwrap()).unwrap();
        prop_assert_eq!(l, r);
    }

    #[test]
    fn negation_is_the_inverse((k, x, _, _) in case()) {
        let g = &algebras()[k];
        let minus: Vec<Q> = x.iter().map(|v| -v.clone()).collect();
        let e = g.mul(&x, &minus).unwrap();
        prop_assert!(e.iter().all(|v| *v == q(0, 1)));
    }

    #[test]
    fn weight_filtration_is_nested_and_compatible((k, xbar, _, _) in case()) {
        let g = &algebras()[k];
        let f = weight_filtration(g, &xbar).unwrap();
        prop_assert!(f.is_nested());
        prop_assert!(f.is_bracket_compatible(g));
        prop_assert_eq!(f.dims()[0], g.dim());
    }

    #[test]
    fn graded_product_is_associative((k, xbar, x, y) in case()) {
        let g = &algebras()[k];
        let dec = WeightDecomposition::for_bias(g, &xbar).unwrap();
        let z: Vec<Q> = x.iter().zip(&y).map(|(a, b)| a - b).collect();
        let l = dec.graded_product(&dec.graded_product(&x, &y).unwrap(), &z).unwrap();
        let r = dec.graded_product(&x, &dec.graded_product(&y, &z).unwrap()).unwrap();
        prop_assert_eq!(l, r);
    }
}

#[test]
fn algebra_json_round_trips() {
    for g in algebras() {
        let text = serde_json::to_string(&g.to_json()).unwrap();
        let back = LieAlgebra::from_json(&serde_json::from_str(&text).unwrap()).unwrap();
        assert_eq!(back.constants_exact(), g.constants_exact());
    }
}
