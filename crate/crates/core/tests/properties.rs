//! Property-based and statistical invariants: probability-measure checks on
//! random inputs, structural tree invariants, permutation equivariance, and
//! chi-square agreement between sampled and enumerated tree distributions.

use std::collections::HashMap;

use proptest::prelude::*;
use statrs::distribution::{ChiSquared, ContinuousCDF};

use irf::dataset::{check_distinct_coordinates, SampleSet};
use irf::forest::{flag_anomalies, irf_estimate, HeightEstimate, ThresholdCriterion};
use irf::itree::{build_itree, tree_signature};
use irf::monotone::{build_mtree, point_depth_relation, MonotonePartition};
use irf::oracle::{enumerate_irf, enumerate_mrf};
use irf::rng::trial_rng;

fn distinct_points(n: usize, d: usize) -> impl Strategy<Value = SampleSet> {
    proptest::collection::vec(
        proptest::collection::vec(0.0f64..100.0, d..=d),
        n..=n,
    )
    .prop_filter_map("coordinates must be distinct per dimension", |points| {
        let s = SampleSet::new(points).ok()?;
        check_distinct_coordinates(&s).satisfied.then_some(s)
    })
}

fn partitions(max_n: usize) -> impl Strategy<Value = MonotonePartition> {
    proptest::collection::vec(0.01f64..5.0, 1..=max_n)
        .prop_map(|lengths| MonotonePartition::from_lengths(&lengths).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn enumerated_tree_probabilities_sum_to_one(s in (1usize..=5, 1usize..=3)
        .prop_flat_map(|(n, d)| distinct_points(n, d)))
    {
        let forest = enumerate_irf(&s).unwrap();
        prop_assert!((forest.total_probability - 1.0).abs() < 1e-12);
        prop_assert!(forest.entries.iter().all(|e| e.probability > 0.0));
    }

    #[test]
    fn enumerated_partition_probabilities_sum_to_one(p in partitions(7)) {
        let forest = enumerate_mrf(&p).unwrap();
        prop_assert!((forest.total_probability - 1.0).abs() < 1e-12);
    }

    #[test]
    fn tree_structure_invariants(s in (2usize..=24).prop_flat_map(|n| distinct_points(n, 2)),
                                 seed in 0u64..1000)
    {
        let t = build_itree(&s, &mut trial_rng(seed, 0));
        // One split per isolation under distinct coordinates.
        prop_assert_eq!(t.internal_count(), s.len() - 1);
        prop_assert_eq!(t.leaf_count(), s.len());
        let depths = t.depths();
        prop_assert_eq!(depths.len(), s.len());
        prop_assert!(depths.values().all(|&h| (1..s.len()).contains(&h)));
        prop_assert_eq!(tree_signature(&t).len(), s.len() - 1);
    }

    #[test]
    fn monotone_depth_transfer_is_well_formed(p in partitions(10), seed in 0u64..1000) {
        let t = build_mtree(&p, &mut trial_rng(seed, 1));
        let gaps = t.interval_depths();
        let points = point_depth_relation(&p, &gaps).unwrap();
        prop_assert_eq!(points.len(), p.len() + 1);
        // Every point sits one level below an adjacent interval.
        prop_assert_eq!(points[0], gaps[0] + 1);
        prop_assert_eq!(points[p.len()], gaps[p.len() - 1] + 1);
        for i in 1..p.len() {
            prop_assert_eq!(points[i], gaps[i - 1].max(gaps[i]) + 1);
        }
    }

    #[test]
    fn flagging_is_monotone_in_quantile(means in proptest::collection::vec(0.0f64..10.0, 2..40),
                                        q in 1.0f64..50.0)
    {
        let est = HeightEstimate {
            sample_variance: vec![0.0; means.len()],
            mean_depth: means,
            trials: 1,
            seed: 0,
        };
        let small = flag_anomalies(&est, &ThresholdCriterion::new(q).unwrap());
        let large = flag_anomalies(&est, &ThresholdCriterion::new((q * 1.7).min(99.0)).unwrap());
        prop_assert!(small.iter().all(|i| large.contains(i)));
    }
}

#[test]
fn estimates_are_permutation_equivariant() {
    // Reversing the point order permutes the per-point results exactly:
    // splits depend on values only, and the trial streams are shared.
    let values = [0.0, 2.0, 3.0, 7.0, 11.0, 12.5];
    let forward = SampleSet::from_1d(&values).unwrap();
    let reversed: Vec<f64> = values.iter().rev().cloned().collect();
    let backward = SampleSet::from_1d(&reversed).unwrap();
    let a = irf_estimate(&forward, 400, 3).unwrap();
    let b = irf_estimate(&backward, 400, 3).unwrap();
    for i in 0..values.len() {
        assert_eq!(a.mean_depth[i], b.mean_depth[values.len() - 1 - i]);
        assert_eq!(a.sample_variance[i], b.sample_variance[values.len() - 1 - i]);
    }
}

fn chi_square_below_critical(observed: &HashMap<Vec<u8>, (f64, u64)>, trials: u64) -> (f64, f64) {
    // observed maps a category key to (exact probability, sample count).
    let statistic: f64 = observed
        .values()
        .map(|&(p, count)| {
            let expected = p * trials as f64;
            (count as f64 - expected).powi(2) / expected
        })
        .sum();
    let df = (observed.len() - 1) as f64;
    let critical = ChiSquared::new(df).unwrap().inverse_cdf(0.999);
    (statistic, critical)
}

#[test]
fn sampled_itrees_match_enumerated_distribution() {
    // 4 points in 2 dimensions: 40 enumerable trees.
    let s = SampleSet::new(vec![
        vec![0.0, 3.0],
        vec![1.0, 0.5],
        vec![2.5, 2.0],
        vec![4.0, 1.0],
    ])
    .unwrap();
    let forest = enumerate_irf(&s).unwrap();
    assert_eq!(forest.count(), 40);

    let key_of = |sig: &[(usize, usize)]| -> Vec<u8> {
        sig.iter().flat_map(|&(d, l)| [d as u8, l as u8]).collect()
    };
    let mut cells: HashMap<Vec<u8>, (f64, u64)> = forest
        .entries
        .iter()
        .map(|e| (key_of(&e.signature), (e.probability, 0u64)))
        .collect();

    let trials = 100_000u64;
    for t in 0..trials {
        let tree = build_itree(&s, &mut trial_rng(2024, t));
        let key = key_of(&tree_signature(&tree));
        cells.get_mut(&key).expect("sampled tree must be enumerated").1 += 1;
    }
    let (statistic, critical) = chi_square_below_critical(&cells, trials);
    assert!(
        statistic < critical,
        "chi-square {statistic:.1} >= critical {critical:.1}"
    );
}

#[test]
fn sampled_mtrees_match_enumerated_distribution() {
    let p = MonotonePartition::from_lengths(&[1.0, 0.4, 2.2, 0.9]).unwrap();
    let forest = enumerate_mrf(&p).unwrap();
    assert_eq!(forest.count(), 14);

    let mut cells: HashMap<Vec<u8>, (f64, u64)> = forest
        .entries
        .iter()
        .map(|e| {
            let key: Vec<u8> = e.signature.iter().map(|&i| i as u8).collect();
            (key, (e.probability, 0u64))
        })
        .collect();

    let trials = 100_000u64;
    for t in 0..trials {
        let tree = build_mtree(&p, &mut trial_rng(2025, t));
        let key: Vec<u8> = tree.signature().iter().map(|&i| i as u8).collect();
        cells.get_mut(&key).expect("sampled tree must be enumerated").1 += 1;
    }
    let (statistic, critical) = chi_square_below_critical(&cells, trials);
    assert!(
        statistic < critical,
        "chi-square {statistic:.1} >= critical {critical:.1}"
    );
}

#[test]
fn fast_1d_path_matches_generic_depth_distribution() {
    // The gap-partition sampler plus the depth-transfer relation must induce
    // the same distribution over per-point depth vectors as the generic 1D
    // tree builder; compare both against enumeration by chi-square.
    let values = [0.0, 1.0, 3.0, 7.5];
    let s = SampleSet::from_1d(&values).unwrap();
    let forest = enumerate_irf(&s).unwrap();
    let mut cells: HashMap<Vec<u8>, (f64, u64)> = HashMap::new();
    for e in &forest.entries {
        let key: Vec<u8> = e.point_depths.iter().map(|&d| d as u8).collect();
        cells.entry(key).or_insert((0.0, 0)).0 += e.probability;
    }

    let p = MonotonePartition::from_sorted_points(&values).unwrap();
    let trials = 100_000u64;
    for t in 0..trials {
        let tree = build_mtree(&p, &mut trial_rng(2026, t));
        let depths = point_depth_relation(&p, &tree.interval_depths()).unwrap();
        let key: Vec<u8> = depths.iter().map(|&d| d as u8).collect();
        cells
            .get_mut(&key)
            .expect("fast-path depth vector must be enumerated")
            .1 += 1;
    }
    let (statistic, critical) = chi_square_below_critical(&cells, trials);
    assert!(
        statistic < critical,
        "chi-square {statistic:.1} >= critical {critical:.1}"
    );
}
