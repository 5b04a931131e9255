mod common;

use common::brute_force_ltad;
use proptest::prelude::*;
use trimmed_l1::model::DataMatrix;
use trimmed_l1::univariate::solve_univariate;

fn instance() -> impl Strategy<Value = (Vec<f64>, usize)> {
    (1usize..=12).prop_flat_map(|n| {
        let values = prop_oneof![
            prop::collection::vec(-100.0f64..100.0, n),
            prop::collection::vec((-4i32..=4).prop_map(f64::from), n),
        ];
        (values, n.div_ceil(2)..=n)
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn window_solution_matches_subset_enumeration((x, h) in instance()) {
        let fast = solve_univariate(&x, h).unwrap();
        let brute = brute_force_ltad(&DataMatrix::from_column(&x).unwrap(), h);
        prop_assert!((fast.objective - brute).abs() <= 1e-12 * brute.max(1.0), "{} vs {}", fast.objective, brute);
        prop_assert_eq!(fast.selection.len(), h);
    }
}
