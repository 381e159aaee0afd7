mod common;

use gnar::graph::NetworkStructure;
use gnar::influence::{global_relevance, influence_report, rscc, RelevanceVariant};
use gnar::spectral::{distance_bands, PairBand};
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn influence_rows_sum_to_one(
        net in common::connected_network(2, 10),
        raw in proptest::collection::vec(-1.0f64..1.0, 8),
        r_star in 1usize..=3,
    ) {
        let structure = NetworkStructure::new(&net);
        let r_star = r_star.min(structure.r_max());
        let coeffs = common::scaled_coefficients(&raw, 2, &[r_star, r_star.min(2)], 0.9);
        let report = influence_report(&coeffs, &structure, r_star, RelevanceVariant::Cumulative).unwrap();
        for (i, row) in report.local_influence.iter().enumerate() {
            if report.empty_boroughs.contains(&report.labels[i]) {
                prop_assert!(row.iter().all(|&x| x == 0.0));
            } else {
                prop_assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
                prop_assert!(row.iter().all(|&x| (0.0..=1.0).contains(&x)));
            }
            for (j, &x) in row.iter().enumerate() {
                let in_borough = matches!(structure.distances().get(i, j), Some(r) if r >= 1 && r <= r_star);
                prop_assert!(in_borough || x == 0.0);
            }
        }
    }

    #[test]
    fn relevance_is_normalised(net in common::connected_network(2, 10), r_star in 1usize..=3) {
        let structure = NetworkStructure::new(&net);
        let r_star = r_star.min(structure.r_max());
        for variant in [RelevanceVariant::Cumulative, RelevanceVariant::SingleStage] {
            let g = global_relevance(&structure, r_star, variant).unwrap();
            prop_assert!(g.iter().all(|&x| (0.0..=1.0).contains(&x)));
            prop_assert!(g.contains(&1.0));
        }
        let g = global_relevance(&structure, r_star, RelevanceVariant::Cumulative).unwrap();
        prop_assert!(g.iter().all(|&x| x > 0.0));
    }

    #[test]
    fn relevance_and_local_influence_ignore_beta_scale(
        net in common::connected_network(2, 8),
        raw in proptest::collection::vec(-1.0f64..1.0, 4),
        factor in 0.1f64..3.0,
    ) {
        let structure = NetworkStructure::new(&net);
        let r = structure.r_max().min(2);
        let a = common::scaled_coefficients(&raw, 1, &[r], 0.3);
        let b = common::scaled_coefficients(&raw, 1, &[r], 0.3 * factor);
        let ra = influence_report(&a, &structure, r, RelevanceVariant::Cumulative).unwrap();
        let rb = influence_report(&b, &structure, r, RelevanceVariant::Cumulative).unwrap();
        prop_assert_eq!(ra.global_relevance, rb.global_relevance);
        for (x, y) in ra.local_influence.iter().flatten().zip(rb.local_influence.iter().flatten()) {
            prop_assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn rscc_support_matches_distance_bands(net in common::network(10), r_star in 1usize..=3) {
        let structure = NetworkStructure::new(&net);
        let bands = distance_bands(&structure, r_star).unwrap();
        for i in 0..net.d() {
            for j in 0..net.d() {
                let value = rscc(&structure, r_star, i, j).unwrap();
                prop_assert!((0.0..=1.0).contains(&value));
                prop_assert_eq!(value == 0.0, bands.get(i, j) == PairBand::ConditionallyUncorrelated);
            }
        }
    }
}
