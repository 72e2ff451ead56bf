use lfsgsc::data::{self, DataMatrix, LabelVector};
use lfsgsc::graph;
use lfsgsc::metrics;
use nalgebra::DMatrix;
use proptest::prelude::*;

fn labels(max_c: usize, n: usize) -> impl Strategy<Value = LabelVector> {
    (1..=max_c).prop_flat_map(move |c| {
        proptest::collection::vec(1..=c, n).prop_map(move |v| LabelVector::new(v, c).unwrap())
    })
}

fn square(n: usize) -> impl Strategy<Value = DMatrix<f64>> {
    proptest::collection::vec(-5.0..5.0f64, n * n).prop_map(move |v| DMatrix::from_vec(n, n, v))
}

proptest! {
    #[test]
    fn metrics_are_bounded_and_symmetric(a in labels(5, 40), b in labels(5, 40)) {
        for f in [metrics::acc, metrics::nmi, metrics::pairwise_f1] {
            let ab = f(&a, &b).unwrap();
            let ba = f(&b, &a).unwrap();
            prop_assert!((0.0..=100.0 + 1e-9).contains(&ab));
            prop_assert!((ab - ba).abs() < 1e-9);
        }
    }

    #[test]
    fn acc_is_at_least_the_majority_share(a in labels(4, 30)) {
        let ones = LabelVector::constant(a.len());
        let majority = *a.histogram().iter().max().unwrap() as f64;
        let acc = metrics::acc(&a, &ones).unwrap();
        prop_assert!((acc - 100.0 * majority / a.len() as f64).abs() < 1e-9);
    }

    #[test]
    fn affinity_is_symmetric_and_nonnegative(z in square(7)) {
        let w = graph::affinity_from_representation(&z).unwrap();
        prop_assert_eq!(&w, &w.transpose());
        prop_assert!(w.iter().all(|&v| v >= 0.0));
    }

    #[test]
    fn graph_filter_is_linear(z in square(6), x1 in square(6), x2 in square(6), k in 0usize..4) {
        let w = graph::affinity_from_representation(&z).unwrap();
        let l = graph::normalized_laplacian(&w).unwrap().laplacian;
        let f = |m: &DMatrix<f64>| graph::graph_filter(&DataMatrix::new(m.clone()).unwrap(), &l, k).unwrap().into_inner();
        let lhs = f(&(&x1 * 2.0 + &x2));
        let rhs = f(&x1) * 2.0 + f(&x2);
        prop_assert!((lhs - &rhs).norm() <= 1e-9 * (1.0 + rhs.norm()));
    }

    #[test]
    fn csv_round_trip(values in proptest::collection::vec(-1e6..1e6f64, 12)) {
        let x = DataMatrix::from_column_slice(3, 4, &values).unwrap();
        let back = data::parse_csv(data::encode_csv(&x).as_bytes()).unwrap();
        prop_assert_eq!(back, x);
    }

    #[test]
    fn ranksum_p_is_a_probability(
        a in proptest::collection::vec(-10.0..10.0f64, 1..12),
        b in proptest::collection::vec(-10.0..10.0f64, 1..12),
    ) {
        let p = metrics::ranksum(&a, &b).unwrap();
        prop_assert!((0.0..=1.0).contains(&p));
        prop_assert!((p - metrics::ranksum(&b, &a).unwrap()).abs() < 1e-12);
    }
}
